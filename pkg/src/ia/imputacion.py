import logging
import sys
from dataclasses import dataclass

import numpy as np
import pandas as pd

sys.path.append("src")

from model.errores import ErrorImputacion
from model.matriz_ratings import RatingMatrix, RatingScale

logger = logging.getLogger(__name__)


@dataclass
class DenseRatings:
    """
    Matriz de ratings completa m x n en [0, 1] con su máscara de procedencia.

    Args:
        valores (np.ndarray): Ratings normalizados, sin celdas vacías.
        observado (np.ndarray): True donde el valor viene de los datos, False si fue imputado.
        ids_usuarios (tuple): Identificadores originales de las filas.
        ids_items (tuple): Identificadores originales de las columnas.
    """
    valores: np.ndarray
    observado: np.ndarray
    ids_usuarios: tuple = ()
    ids_items: tuple = ()

    def __post_init__(self):
        if self.valores.shape != self.observado.shape:
            raise ErrorImputacion("la máscara no coincide con la forma de la matriz")
        if not np.all(np.isfinite(self.valores)):
            raise ErrorImputacion("la matriz completa contiene valores no finitos")
        if not self.ids_usuarios:
            self.ids_usuarios = tuple(str(i) for i in range(self.valores.shape[0]))
        if not self.ids_items:
            self.ids_items = tuple(str(j) for j in range(self.valores.shape[1]))

    @property
    def m(self):
        return self.valores.shape[0]

    @property
    def n(self):
        return self.valores.shape[1]

    def como_matriz(self, escala=None):
        """
        Convierte la matriz completa en una RatingMatrix con las m x n entradas, útil
        para correr el muestreador sobre los datos completados.

        Args:
            escala (RatingScale, optional): Escala de los valores; por defecto [0, 1] continua.

        Returns:
            RatingMatrix: Matriz totalmente densa.
        """
        escala = escala or RatingScale(0.0, 1.0, 0.0)
        usuarios, items = np.indices((self.m, self.n))
        crudos = escala.min_raw + self.valores.reshape(-1) * (escala.max_raw - escala.min_raw)
        crudos = np.clip(crudos, escala.min_raw, escala.max_raw)
        return RatingMatrix(usuarios.reshape(-1), items.reshape(-1), crudos, escala, self.ids_usuarios, self.ids_items)


def fill_linear_regression(matrix):
    """
    Completa la matriz de ratings en dos etapas.

    1. Cada celda vacía del usuario i toma la media de los ratings de i (la media
       global si el usuario no tiene ratings).
    2. Para cada usuario i con celdas vacías se ajusta una regresión lineal con sesgo:
       cada item k calificado por i aporta una fila x_k (la columna k de la etapa 1 sin
       la fila de i) con objetivo r_ik. La solución es la de norma mínima
       (pseudo-inversa), así el sistema subdeterminado siempre tiene solución. La
       predicción w^T x_j + b se recorta a [0, 1].

    Todas las regresiones usan la matriz de la etapa 1, sin retroalimentación entre
    usuarios: el resultado no depende del orden.

    Args:
        matrix (RatingMatrix): Ratings observados.

    Returns:
        DenseRatings: Matriz completa con máscara de procedencia.
    """
    if matrix.m < 2:
        raise ErrorImputacion("la regresión necesita al menos 2 usuarios")
    if len(matrix) == 0:
        raise ErrorImputacion("la matriz de ratings está vacía")

    observado = np.zeros((matrix.m, matrix.n), dtype=bool)
    observado[matrix.usuarios, matrix.items] = True
    grid = matrix.como_denso()

    # Etapa 1: media por usuario.
    media_global = float(np.mean(matrix.ratings))
    etapa1 = grid.copy()
    for i in range(matrix.m):
        ratings_i = matrix.ratings_usuario(i)
        media = float(np.mean(ratings_i)) if len(ratings_i) else media_global
        etapa1[i, ~observado[i]] = media

    # Etapa 2: regresión por usuario contra la matriz de la etapa 1.
    completa = etapa1.copy()
    for i in range(matrix.m):
        faltantes = np.flatnonzero(~observado[i])
        calificados = matrix.items_por_usuario[i]
        if len(faltantes) == 0 or len(calificados) == 0:
            continue
        completa[i, faltantes] = _predecir_usuario(etapa1, i, calificados, matrix.ratings_usuario(i), faltantes)

    logger.info("Imputadas %d celdas de %d", int((~observado).sum()), observado.size)
    return DenseRatings(completa, observado, matrix.ids_usuarios, matrix.ids_items)


def _diseno(etapa1, i, columnas):
    """Filas [x_k, 1] para las columnas dadas, sin la fila del usuario i."""
    otros = np.delete(etapa1, i, axis=0)
    x = otros[:, columnas].T
    return np.hstack([x, np.ones((len(columnas), 1))])


def _predecir_usuario(etapa1, i, calificados, objetivos, faltantes):
    """
    Ajusta la regresión de norma mínima del usuario i y predice sus celdas faltantes.

    Returns:
        np.ndarray: Predicciones recortadas a [0, 1].
    """
    A = _diseno(etapa1, i, calificados)
    coeficientes, *_ = np.linalg.lstsq(A, objetivos, rcond=None)
    predicciones = _diseno(etapa1, i, faltantes) @ coeficientes
    return np.clip(predicciones, 0.0, 1.0)


def item_correlation(dense):
    """
    Matriz de correlación coseno entre las columnas (items) de la matriz completa.

    Args:
        dense (DenseRatings): Matriz completa.

    Returns:
        np.ndarray: Matriz n x n simétrica con diagonal 1 y valores en [-1, 1].
    """
    R = dense.valores
    normas = np.linalg.norm(R, axis=0)
    nulas = np.flatnonzero(normas == 0)
    if len(nulas):
        j = int(nulas[0])
        raise ErrorImputacion(f"el item {dense.ids_items[j]} tiene una columna de ratings nula")
    C = (R.T @ R) / np.outer(normas, normas)
    C = np.clip(0.5 * (C + C.T), -1.0, 1.0)
    np.fill_diagonal(C, 1.0)
    return C


def augment(dense, C):
    """
    Apila la matriz de correlación C (n x n) sobre la matriz completa (m x n): las
    primeras n filas representan items y las últimas m, usuarios.

    Args:
        dense (DenseRatings): Matriz completa.
        C (np.ndarray): Correlación entre items.

    Returns:
        np.ndarray: Matriz (n + m) x n de características.
    """
    C = np.asarray(C, dtype=float)
    if C.shape != (dense.n, dense.n):
        raise ErrorImputacion(f"C debe ser {dense.n} x {dense.n}, recibido {C.shape}")
    return np.vstack([C, dense.valores])


def export_dense(dense, grid_path, mask_path):
    """
    Escribe la matriz completa como TSV (filas = usuarios, columnas = items) y la máscara
    con `O` para celdas observadas e `I` para imputadas.
    """
    pd.DataFrame(dense.valores, index=list(dense.ids_usuarios), columns=list(dense.ids_items)).to_csv(
        grid_path, sep="\t", index_label="user"
    )
    mascara = np.where(dense.observado, "O", "I")
    pd.DataFrame(mascara, index=list(dense.ids_usuarios), columns=list(dense.ids_items)).to_csv(
        mask_path, sep="\t", index_label="user"
    )
