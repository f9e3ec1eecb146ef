import math
import sys
import warnings

import numpy as np
from scipy.stats import kendalltau

sys.path.append("src")

from model.errores import ErrorEvaluacion


def _validar_secuencias(X, Y=None):
    X = np.asarray(X, dtype=float).reshape(-1)
    if Y is not None:
        Y = np.asarray(Y, dtype=float).reshape(-1)
        if len(X) != len(Y):
            raise ErrorEvaluacion(f"las secuencias tienen longitudes distintas ({len(X)} y {len(Y)})")
    if len(X) < 2:
        raise ErrorEvaluacion("Kendall's tau necesita al menos 2 elementos")
    return X, Y


def kendall_tau(X, Y):
    """
    Kendall's tau con empates:

        tau = (C - D) / (sqrt(C + D + E_x) * sqrt(C + D + E_y))

    donde C y D son los pares concordantes y discordantes, E_x los pares empatados
    solo en X y E_y los empatados solo en Y. Los pares empatados en ambas secuencias
    no cuentan. La fórmula coincide con la variante tau-b, así que el conteo se delega
    a scipy (O(n log n)).

    Args:
        X (array-like): Primera secuencia.
        Y (array-like): Segunda secuencia, de la misma longitud.

    Returns:
        float: tau en [-1, 1]; 0 si alguna secuencia es constante (denominador nulo).
    """
    X, Y = _validar_secuencias(X, Y)
    # C + D + E_y = 0 si X es constante; C + D + E_x = 0 si Y lo es.
    if np.all(X == X[0]) or np.all(Y == Y[0]):
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        tau = kendalltau(X, Y, variant="b").statistic
    if not np.isfinite(tau):
        return 0.0
    return float(np.clip(tau, -1.0, 1.0))


def ideal_tau(X):
    """
    Menor tau alcanzable contra una secuencia Y sin empates: todos los pares con
    X distinto quedan discordantes y los empatados en X cuentan como E_x, de modo que

        tau_ideal = -sqrt(D_max / (D_max + E_x)).

    Args:
        X (array-like): Ratings de prueba.

    Returns:
        float: Cota inferior de tau; 0 si todos los valores de X son iguales.
    """
    X, _ = _validar_secuencias(X)
    n = len(X)
    total = n * (n - 1) // 2
    _, conteos = np.unique(X, return_counts=True)
    empatados = int(np.sum(conteos * (conteos - 1) // 2))
    d_max = total - empatados
    if d_max == 0:
        return 0.0
    return -math.sqrt(d_max / total)


def score_embedding(emb, test_pairs):
    """
    Evalúa un embedding con los ratings de prueba: X son los ratings y Y las distancias
    usuario-item. Valores negativos indican un buen embedding.

    Args:
        emb (Embedding): Embedding a evaluar.
        test_pairs (array-like): Ternas (i, j, r_ij) con índices del embedding.

    Returns:
        float: Kendall's tau entre ratings y distancias.
    """
    pares = np.asarray(test_pairs, dtype=float).reshape(-1, 3)
    usuarios = pares[:, 0].astype(np.int64)
    items = pares[:, 1].astype(np.int64)
    if (usuarios.min(initial=0) < 0 or usuarios.max(initial=-1) >= emb.m
            or items.min(initial=0) < 0 or items.max(initial=-1) >= emb.n):
        raise ErrorEvaluacion("un par de prueba referencia un punto que no está en el embedding")
    return kendall_tau(pares[:, 2], emb.distancias(usuarios, items))
