import sys

import numpy as np
import pandas as pd

sys.path.append("src")

from model.errores import ErrorMuestreo


class Embedding:
    """
    Posiciones de los m puntos de usuario y los n puntos de item en el espacio
    euclidiano D-dimensional.

    Todos los puntos se guardan en un único arreglo (m + n) x D: las primeras m filas
    son usuarios y las siguientes n son items. `usuarios` e `items` son vistas de ese
    arreglo, así el muestreador puede mover y normalizar puntos en sitio.
    """

    def __init__(self, usuarios, items, ids_usuarios=None, ids_items=None):
        """
        Args:
            usuarios (array-like): Matriz m x D con los puntos de usuario.
            items (array-like): Matriz n x D con los puntos de item.
            ids_usuarios (sequence, optional): Identificadores originales de los usuarios.
            ids_items (sequence, optional): Identificadores originales de los items.
        """
        usuarios = np.asarray(usuarios, dtype=float)
        items = np.asarray(items, dtype=float)
        if usuarios.ndim != 2 or items.ndim != 2 or usuarios.shape[1] != items.shape[1]:
            raise ErrorMuestreo("usuarios e items deben ser matrices con la misma dimensión D")
        self.puntos = np.vstack([usuarios, items])
        if not np.all(np.isfinite(self.puntos)):
            raise ErrorMuestreo("el embedding contiene coordenadas no finitas")
        self.m = usuarios.shape[0]
        self.n = items.shape[0]
        self.ids_usuarios = tuple(str(u) for u in ids_usuarios) if ids_usuarios is not None else tuple(str(i) for i in range(self.m))
        self.ids_items = tuple(str(g) for g in ids_items) if ids_items is not None else tuple(str(j) for j in range(self.n))

    @property
    def D(self):
        return self.puntos.shape[1]

    @property
    def usuarios(self):
        return self.puntos[:self.m]

    @property
    def items(self):
        return self.puntos[self.m:]

    def copia(self):
        """Copia independiente del embedding (mismos identificadores)."""
        return Embedding(self.usuarios.copy(), self.items.copy(), self.ids_usuarios, self.ids_items)

    def distancias(self, usuarios, items):
        """
        Distancias euclidianas ||u_i - g_j|| para pares de índices alineados.

        Args:
            usuarios (np.ndarray): Índices de usuario.
            items (np.ndarray): Índices de item.

        Returns:
            np.ndarray: Una distancia por par.
        """
        diferencia = self.puntos[usuarios] - self.puntos[self.m + np.asarray(items)]
        return np.sqrt(np.einsum("ij,ij->i", diferencia, diferencia))

    def __repr__(self):
        return f"Embedding(m={self.m}, n={self.n}, D={self.D})"


def normalizar_en_sitio(puntos):
    """
    Traslada y escala un arreglo de puntos en sitio: media cero y varianza agrupada uno.

    Args:
        puntos (np.ndarray): Arreglo (m + n) x D que se modifica.

    Returns:
        float: El factor de escala aplicado.
    """
    if puntos.shape[0] < 2:
        raise ErrorMuestreo("la normalización requiere al menos 2 puntos")
    puntos -= puntos.mean(axis=0)
    varianza = float(np.mean(puntos * puntos))
    if not varianza > 0:
        raise ErrorMuestreo("todos los puntos coinciden: la varianza es cero")
    escala = 1.0 / np.sqrt(varianza)
    # Solo un escalar, no una matriz: no es un blanqueo.
    puntos *= escala
    return escala


def normalize(emb):
    """
    Devuelve un embedding con la media de todos los puntos en el origen y la
    desviación cuadrática media (sobre puntos y coordenadas) igual a 1.

    Args:
        emb (Embedding): Embedding de entrada (no se modifica).

    Returns:
        Embedding: Copia normalizada.
    """
    nuevo = emb.copia()
    normalizar_en_sitio(nuevo.puntos)
    return nuevo


def export_embedding(emb, path):
    """
    Escribe el embedding como TSV `kind index original_id x_1 ... x_D`.

    Args:
        emb (Embedding): Embedding a exportar.
        path (str | Path): Archivo de destino.
    """
    columnas = [f"x_{k + 1}" for k in range(emb.D)]
    df = pd.DataFrame(emb.puntos, columns=columnas)
    df.insert(0, "original_id", list(emb.ids_usuarios) + list(emb.ids_items))
    df.insert(0, "index", list(range(emb.m)) + list(range(emb.n)))
    df.insert(0, "kind", ["user"] * emb.m + ["item"] * emb.n)
    df.to_csv(path, sep="\t", index=False)


def load_embedding(path):
    """
    Lee un TSV escrito por `export_embedding`.

    Args:
        path (str | Path): Archivo de origen.

    Returns:
        Embedding: El embedding con sus identificadores originales.
    """
    df = pd.read_csv(
        path, sep="\t", dtype={"kind": str, "original_id": str}, keep_default_na=False, float_precision="round_trip"
    )
    columnas = [c for c in df.columns if c.startswith("x_")]
    if list(df.columns[:3]) != ["kind", "index", "original_id"] or not columnas:
        raise ErrorMuestreo(f"formato de embedding inválido en {path}")
    usuarios = df[df["kind"] == "user"].sort_values("index")
    items = df[df["kind"] == "item"].sort_values("index")
    return Embedding(
        usuarios[columnas].to_numpy(dtype=float).reshape(-1, len(columnas)),
        items[columnas].to_numpy(dtype=float).reshape(-1, len(columnas)),
        usuarios["original_id"].tolist(),
        items["original_id"].tolist(),
    )
