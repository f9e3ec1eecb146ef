import logging
import sys
from dataclasses import dataclass

import numpy as np
import pandas as pd

sys.path.append("src")

from model.errores import ErrorDatosRatings

logger = logging.getLogger(__name__)

COLUMNAS_RATINGS = ["user", "item", "rating"]
COLUMNAS_MAPEO = ["index", "original_id", "kind"]


@dataclass(frozen=True)
class RatingScale:
    """
    Escala declarada de los ratings crudos de un conjunto de datos.

    Args:
        min_raw (float): Valor mínimo de la escala (se normaliza a 0).
        max_raw (float): Valor máximo de la escala (se normaliza a 1).
        step (float): Incremento entre valores crudos; 0 para escalas continuas.
    """
    min_raw: float
    max_raw: float
    step: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.min_raw) and np.isfinite(self.max_raw)):
            raise ErrorDatosRatings("la escala debe tener extremos finitos")
        if self.max_raw <= self.min_raw:
            raise ErrorDatosRatings(
                f"escala inválida: max_raw ({self.max_raw}) debe ser mayor que min_raw ({self.min_raw})"
            )
        if self.step < 0:
            raise ErrorDatosRatings("el incremento de la escala no puede ser negativo")

    def normalizar(self, crudos):
        """
        Lleva valores crudos al rango [0, 1] con la regla min-max de la escala declarada.

        Args:
            crudos (array-like): Ratings en la escala original.

        Returns:
            np.ndarray: Ratings normalizados.
        """
        crudos = np.asarray(crudos, dtype=float)
        return (crudos - self.min_raw) / (self.max_raw - self.min_raw)

    def niveles(self):
        """
        Número de niveles que admite la escala, o None si es continua.
        """
        if self.step == 0:
            return None
        return int(round((self.max_raw - self.min_raw) / self.step)) + 1


class RatingMatrix:
    """
    Matriz de ratings dispersa con índices densos para usuarios e items.

    Guarda las entradas observadas (i, j, r_ij) junto con los índices invertidos
    G^i (items calificados por el usuario i) y U^j (usuarios que calificaron el item j).
    Los arreglos internos son de solo lectura: la matriz es inmutable tras construirse
    y se puede compartir entre procesos de réplicas sin copias defensivas.
    """

    def __init__(self, usuarios, items, crudos, escala, ids_usuarios, ids_items):
        """
        Construye y valida la matriz.

        Args:
            usuarios (array-like): Índice denso de usuario de cada entrada.
            items (array-like): Índice denso de item de cada entrada.
            crudos (array-like): Rating crudo de cada entrada, dentro de `escala`.
            escala (RatingScale): Escala declarada usada para normalizar.
            ids_usuarios (sequence): Identificador original de cada usuario (posición = índice).
            ids_items (sequence): Identificador original de cada item.
        """
        self.escala = escala
        self.ids_usuarios = tuple(str(u) for u in ids_usuarios)
        self.ids_items = tuple(str(g) for g in ids_items)
        self.m = len(self.ids_usuarios)
        self.n = len(self.ids_items)

        self.usuarios = np.asarray(usuarios, dtype=np.int64).reshape(-1)
        self.items = np.asarray(items, dtype=np.int64).reshape(-1)
        self.crudos = np.asarray(crudos, dtype=float).reshape(-1)

        if not (len(self.usuarios) == len(self.items) == len(self.crudos)):
            raise ErrorDatosRatings("las columnas de entradas tienen longitudes distintas")
        if len(self.usuarios) and (self.usuarios.min() < 0 or self.usuarios.max() >= self.m):
            raise ErrorDatosRatings("índice de usuario fuera de rango")
        if len(self.items) and (self.items.min() < 0 or self.items.max() >= self.n):
            raise ErrorDatosRatings("índice de item fuera de rango")

        fuera = (self.crudos < escala.min_raw) | (self.crudos > escala.max_raw) | ~np.isfinite(self.crudos)
        if fuera.any():
            k = int(np.flatnonzero(fuera)[0])
            raise ErrorDatosRatings(
                f"rating {self.crudos[k]} fuera de la escala [{escala.min_raw}, {escala.max_raw}]"
            )

        # Cada par (i, j) puede aparecer una sola vez (delta_ij en {0, 1}).
        claves = self.usuarios * max(self.n, 1) + self.items
        _, primeras, conteos = np.unique(claves, return_index=True, return_counts=True)
        if (conteos > 1).any():
            raise ErrorDatosRatings("par (usuario, item) duplicado")

        self.ratings = np.clip(escala.normalizar(self.crudos), 0.0, 1.0)

        # Índices invertidos: posiciones de las entradas de cada usuario y de cada item.
        self.entradas_por_usuario = self._agrupar(self.usuarios, self.m)
        self.entradas_por_item = self._agrupar(self.items, self.n)
        self.items_por_usuario = [self.items[pos] for pos in self.entradas_por_usuario]
        self.usuarios_por_item = [self.usuarios[pos] for pos in self.entradas_por_item]

        for arreglo in (self.usuarios, self.items, self.crudos, self.ratings):
            arreglo.setflags(write=False)

    @staticmethod
    def _agrupar(indices, total):
        """
        Agrupa las posiciones de las entradas por índice (orden estable).

        Args:
            indices (np.ndarray): Índice de usuario o item de cada entrada.
            total (int): Número de usuarios o items.

        Returns:
            list: Lista de `total` arreglos de posiciones.
        """
        orden = np.argsort(indices, kind="stable")
        cortes = np.searchsorted(indices[orden], np.arange(total + 1))
        grupos = []
        for k in range(total):
            grupo = orden[cortes[k]:cortes[k + 1]]
            grupo.setflags(write=False)
            grupos.append(grupo)
        return grupos

    def __len__(self):
        return len(self.ratings)

    def __eq__(self, otra):
        if not isinstance(otra, RatingMatrix):
            return NotImplemented
        return (
            self.ids_usuarios == otra.ids_usuarios
            and self.ids_items == otra.ids_items
            and self.escala == otra.escala
            and np.array_equal(self.usuarios, otra.usuarios)
            and np.array_equal(self.items, otra.items)
            and np.array_equal(self.crudos, otra.crudos)
        )

    def __repr__(self):
        return f"RatingMatrix(m={self.m}, n={self.n}, entradas={len(self)})"

    def ratings_usuario(self, i):
        """Ratings normalizados del usuario i, alineados con `items_por_usuario[i]`."""
        return self.ratings[self.entradas_por_usuario[i]]

    def ratings_item(self, j):
        """Ratings normalizados del item j, alineados con `usuarios_por_item[j]`."""
        return self.ratings[self.entradas_por_item[j]]

    def como_denso(self, relleno=np.nan):
        """
        Devuelve la matriz m x n con los ratings normalizados y `relleno` en las celdas vacías.
        """
        grid = np.full((self.m, self.n), relleno, dtype=float)
        grid[self.usuarios, self.items] = self.ratings
        return grid

    def filtrar(self, mascara):
        """
        Conserva solo las entradas marcadas en `mascara` y elimina los usuarios e items
        que quedan sin ratings, reasignando índices densos en el orden original.

        Args:
            mascara (np.ndarray): Arreglo booleano con una posición por entrada.

        Returns:
            tuple: (RatingMatrix filtrada, mapa_usuarios, mapa_items), donde los mapas
                   traducen índice viejo -> índice nuevo (-1 si el punto fue eliminado).
        """
        mascara = np.asarray(mascara, dtype=bool)
        usuarios = self.usuarios[mascara]
        items = self.items[mascara]

        vivos_u = np.zeros(self.m, dtype=bool)
        vivos_u[usuarios] = True
        vivos_g = np.zeros(self.n, dtype=bool)
        vivos_g[items] = True

        mapa_u = np.full(self.m, -1, dtype=np.int64)
        mapa_u[vivos_u] = np.arange(vivos_u.sum())
        mapa_g = np.full(self.n, -1, dtype=np.int64)
        mapa_g[vivos_g] = np.arange(vivos_g.sum())

        nueva = RatingMatrix(
            mapa_u[usuarios],
            mapa_g[items],
            self.crudos[mascara],
            self.escala,
            [u for u, vivo in zip(self.ids_usuarios, vivos_u) if vivo],
            [g for g, vivo in zip(self.ids_items, vivos_g) if vivo],
        )
        return nueva, mapa_u, mapa_g


def load_triplets(path, scale, mapping_path=None):
    """
    Lee un CSV `user,item,rating` y construye una RatingMatrix normalizada.

    Los identificadores se asignan a índices densos en orden de primera aparición.
    Si se entrega el archivo de mapeo `index,original_id,kind` escrito por
    `export_triplets`, ese orden se respeta (incluye usuarios o items sin ratings).

    Args:
        path (str | Path): Ruta del CSV de ratings.
        scale (RatingScale): Escala declarada de los ratings crudos.
        mapping_path (str | Path, optional): Archivo de mapeo de índices.

    Returns:
        RatingMatrix: La matriz cargada.

    Raises:
        ErrorDatosRatings: Fila mal formada, rating fuera de rango o par duplicado.
    """
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.ParserError as e:
        raise ErrorDatosRatings(f"fila mal formada en {path}: {e}") from e
    except pd.errors.EmptyDataError as e:
        raise ErrorDatosRatings(f"archivo vacío: {path}") from e

    if list(df.columns) != COLUMNAS_RATINGS:
        raise ErrorDatosRatings(
            f"cabecera inválida {list(df.columns)}; se esperaba {','.join(COLUMNAS_RATINGS)}", fila=1
        )

    ids_usuarios, ids_items = {}, {}
    if mapping_path is not None:
        mapeo = pd.read_csv(mapping_path, dtype=str, keep_default_na=False)
        if list(mapeo.columns) != COLUMNAS_MAPEO:
            raise ErrorDatosRatings(f"cabecera inválida en el mapeo {mapping_path}", fila=1)
        for fila in mapeo.itertuples(index=False):
            destino = ids_usuarios if fila.kind == "user" else ids_items
            destino[fila.original_id] = int(fila.index)

    usuarios, items, crudos = [], [], []
    vistos = {}
    # La fila 1 es la cabecera: la primera entrada de datos es la fila 2.
    for k, (u, g, r) in enumerate(df.itertuples(index=False, name=None), start=2):
        if not isinstance(u, str) or not isinstance(g, str) or not isinstance(r, str) or not u or not g:
            raise ErrorDatosRatings("fila mal formada (faltan campos)", fila=k)
        try:
            valor = float(r)
        except ValueError:
            raise ErrorDatosRatings(f"rating no numérico '{r}'", fila=k) from None
        if not np.isfinite(valor) or valor < scale.min_raw or valor > scale.max_raw:
            raise ErrorDatosRatings(
                f"rating {valor} fuera de la escala [{scale.min_raw}, {scale.max_raw}]", fila=k
            )
        if (u, g) in vistos:
            raise ErrorDatosRatings(f"par duplicado ({u}, {g}); primera aparición en la fila {vistos[(u, g)]}", fila=k)
        vistos[(u, g)] = k

        i = ids_usuarios.setdefault(u, len(ids_usuarios))
        j = ids_items.setdefault(g, len(ids_items))
        usuarios.append(i)
        items.append(j)
        crudos.append(valor)

    matriz = RatingMatrix(
        usuarios, items, crudos, scale,
        sorted(ids_usuarios, key=ids_usuarios.get),
        sorted(ids_items, key=ids_items.get),
    )
    logger.info("Ratings cargados de %s: m=%d, n=%d, |R|=%d", path, matriz.m, matriz.n, len(matriz))
    return matriz


def export_triplets(matrix, path, mapping_path=None):
    """
    Escribe la matriz como CSV `user,item,rating` con los valores crudos originales
    y, opcionalmente, el archivo de mapeo `index,original_id,kind`.

    Args:
        matrix (RatingMatrix): Matriz a exportar.
        path (str | Path): Destino del CSV de ratings.
        mapping_path (str | Path, optional): Destino del archivo de mapeo.
    """
    df = pd.DataFrame({
        "user": [matrix.ids_usuarios[i] for i in matrix.usuarios],
        "item": [matrix.ids_items[j] for j in matrix.items],
        "rating": matrix.crudos,
    })
    df.to_csv(path, index=False)

    if mapping_path is not None:
        mapeo = pd.DataFrame(
            [(i, uid, "user") for i, uid in enumerate(matrix.ids_usuarios)]
            + [(j, gid, "item") for j, gid in enumerate(matrix.ids_items)],
            columns=COLUMNAS_MAPEO,
        )
        mapeo.to_csv(mapping_path, index=False)


def load_labels(path):
    """
    Lee el archivo opcional de categorías `item,category` usado para los gráficos.

    Args:
        path (str | Path): Ruta del CSV de etiquetas.

    Returns:
        dict: Identificador original de item -> categoría.
    """
    df = pd.read_csv(path, dtype=str, keep_default_na=False)
    if list(df.columns) != ["item", "category"]:
        raise ErrorDatosRatings(f"cabecera inválida en {path}; se esperaba item,category", fila=1)
    return dict(zip(df["item"], df["category"]))


def density(matrix):
    """
    Densidad de la matriz: fracción de celdas usuario-item con rating.

    Args:
        matrix (RatingMatrix): Matriz de ratings.

    Returns:
        float: (suma de delta_ij) / (m * n).
    """
    if matrix.m == 0 or matrix.n == 0:
        raise ErrorDatosRatings("la densidad requiere m > 0 y n > 0")
    return len(matrix) / (matrix.m * matrix.n)


def distinct_levels(matrix):
    """
    Valores normalizados distintos presentes en los datos, en orden ascendente.
    Su cantidad es el K por defecto de la función de rating.

    Args:
        matrix (RatingMatrix): Matriz de ratings no vacía.

    Returns:
        list: Niveles distintos ordenados.
    """
    if len(matrix) == 0:
        raise ErrorDatosRatings("la matriz no tiene ratings")
    return [float(v) for v in np.unique(matrix.ratings)]
