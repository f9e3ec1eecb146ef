import sys
from dataclasses import dataclass

import numpy as np

sys.path.append("src")

from model.errores import ErrorFuncionRating

# Separación mínima entre umbrales consecutivos cuando un nivel queda vacío.
HUECO_MINIMO = 1e-9


@dataclass(frozen=True)
class RatingFunction:
    """
    Función de rating escalonada f(x; Theta) con K niveles de cuantización.

    El nivel i (1..K) vale 1 - (i-1)/(K-1) y cubre las distancias en
    [theta_{i-1}, theta_i), con theta_0 = 0 y theta_K = infinito implícitos.

    Args:
        K (int): Número de niveles, al menos 2.
        thetas (tuple): Los K-1 umbrales finitos, positivos y estrictamente crecientes.
    """
    K: int
    thetas: tuple

    def __post_init__(self):
        object.__setattr__(self, "thetas", tuple(float(t) for t in self.thetas))
        if self.K < 2:
            raise ErrorFuncionRating(f"K debe ser al menos 2 (recibido {self.K})")
        if len(self.thetas) != self.K - 1:
            raise ErrorFuncionRating(f"se esperaban {self.K - 1} umbrales, hay {len(self.thetas)}")
        t = np.asarray(self.thetas)
        if not np.all(np.isfinite(t)) or np.any(t <= 0):
            raise ErrorFuncionRating("los umbrales deben ser finitos y positivos")
        if np.any(np.diff(t) <= 0):
            raise ErrorFuncionRating("los umbrales deben ser estrictamente crecientes")

    @property
    def niveles(self):
        """Valores de los K niveles, de mayor (distancia 0) a menor."""
        return niveles_rating(self.K)

    def __call__(self, x):
        return eval_f(self, x)

    def __str__(self):
        return rating_function_to_line(self)


def niveles_rating(K):
    """
    Valores cuantizados 1 - (i-1)/(K-1) para i = 1..K.

    Args:
        K (int): Número de niveles.

    Returns:
        np.ndarray: Arreglo decreciente que empieza en 1 y termina en 0.
    """
    return 1.0 - np.arange(K) / (K - 1)


def eval_f(func, x):
    """
    Evalúa la función escalonada en una o varias distancias.

    Args:
        func (RatingFunction): Función de rating.
        x (float | array-like): Distancias no negativas.

    Returns:
        float | np.ndarray: Rating esperado en [0, 1] (mismo formato que `x`).
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ErrorFuncionRating("la distancia debe ser no negativa")
    # Cantidad de umbrales <= x: es el índice (base 0) del nivel que contiene a x.
    nivel = np.searchsorted(np.asarray(func.thetas), arr, side="right")
    valor = 1.0 - nivel / (func.K - 1)
    if np.ndim(x) == 0:
        return float(valor)
    return valor


def sse(func, pairs):
    """
    Suma de errores cuadráticos de `func` sobre pares (distancia, rating).

    Args:
        func (RatingFunction): Función de rating.
        pairs (array-like): Arreglo N x 2 o lista de tuplas (distancia, rating).

    Returns:
        float: Suma de (f(d) - r)^2; 0 para una lista vacía.
    """
    distancias, ratings = _separar_pares(pairs)
    if len(distancias) == 0:
        return 0.0
    return float(np.sum((eval_f(func, distancias) - ratings) ** 2))


def _separar_pares(pairs):
    """Convierte los pares a dos arreglos float (distancias, ratings)."""
    if isinstance(pairs, tuple) and len(pairs) == 2 and np.ndim(pairs[0]) == 1:
        return np.asarray(pairs[0], dtype=float), np.asarray(pairs[1], dtype=float)
    arr = np.asarray(pairs, dtype=float)
    if arr.size == 0:
        return np.empty(0), np.empty(0)
    arr = arr.reshape(-1, 2)
    return arr[:, 0], arr[:, 1]


def fit_rating_function(pairs, K):
    """
    M-step exacto: umbrales que minimizan la suma de errores cuadráticos.

    Ordena los pares por distancia y resuelve una programación dinámica sobre
    (posición ordenada, nivel) en O(NK): los valores de los niveles están fijos y se
    asignan en orden no creciente a medida que crece la distancia. Con las sumas
    acumuladas de (r - v_l)^2 el costo de un segmento es una resta, y el mejor corte
    previo se obtiene con un mínimo acumulado por nivel.

    Pares con la misma distancia quedan siempre en el mismo segmento, y un par a
    distancia 0 siempre en el primer nivel (f(0) = 1). Los umbrales se colocan en el
    punto medio entre las dos distancias vecinas del corte.

    Args:
        pairs (array-like): N pares (distancia, rating), o una tupla (distancias, ratings).
        K (int): Número de niveles de cuantización.

    Returns:
        RatingFunction: Función con SSE mínima sobre los pares.
    """
    if K < 2:
        raise ErrorFuncionRating(f"K debe ser al menos 2 (recibido {K})")
    distancias, ratings = _separar_pares(pairs)
    N = len(distancias)
    if N == 0:
        raise ErrorFuncionRating("no hay pares para ajustar la función de rating")
    if np.any(distancias < 0) or not np.all(np.isfinite(distancias)) or not np.all(np.isfinite(ratings)):
        raise ErrorFuncionRating("las distancias deben ser finitas y no negativas")

    # Orden estable por (distancia, rating).
    orden = np.lexsort((ratings, distancias))
    d = distancias[orden]
    r = ratings[orden]
    valores = niveles_rating(K)

    # Cortes permitidos entre la posición q-1 y q (q = 0..N).
    permitido = np.ones(N + 1, dtype=bool)
    permitido[1:N] = d[:-1] < d[1:]
    permitido[0] = d[0] > 0

    mejor = np.full(N + 1, np.inf)
    mejor[0] = 0.0
    # origen[l, p]: corte q donde empieza el nivel l si el nivel l termina en p.
    origen = np.zeros((K, N + 1), dtype=np.int32 if N < 2**31 - 1 else np.int64)
    indices = np.arange(N + 1)

    for nivel in range(K):
        v = valores[nivel]
        acumulado = np.concatenate(([0.0], np.cumsum((r - v) ** 2)))
        candidatos = mejor - acumulado
        if nivel > 0:
            candidatos = np.where(permitido, candidatos, np.inf)
        minimos = np.minimum.accumulate(candidatos)
        # Último índice que alcanza el mínimo acumulado hasta cada posición.
        origen[nivel] = np.maximum.accumulate(np.where(candidatos <= minimos, indices, 0))
        mejor = acumulado + minimos

    # Reconstrucción de los cortes b_1..b_{K-1} desde el final.
    cortes = np.zeros(K + 1, dtype=np.int64)
    cortes[K] = N
    p = N
    for nivel in range(K - 1, -1, -1):
        p = int(origen[nivel, p])
        cortes[nivel] = p

    return RatingFunction(K, _umbrales_desde_cortes(d, cortes[1:K]))


def _umbrales_desde_cortes(d, cortes):
    """
    Traduce posiciones de corte en la lista ordenada a umbrales de distancia.

    Cada umbral queda en el punto medio entre las distancias vecinas del corte; antes
    del primer par el vecino es 0 y después del último es 2 * max(d). Un corte repetido
    (nivel intermedio vacío) sube el umbral anterior en HUECO_MINIMO, sin llegar a la
    distancia siguiente al corte.

    Args:
        d (np.ndarray): Distancias ordenadas.
        cortes (np.ndarray): K-1 posiciones de corte no decrecientes.

    Returns:
        list: Umbrales estrictamente crecientes.
    """
    techo = 2.0 * d[-1] if d[-1] > 0 else 1.0
    izquierda = np.concatenate(([0.0], d))
    derecha = np.concatenate((d, [techo]))
    umbrales = []
    for q in cortes:
        theta = 0.5 * (izquierda[q] + derecha[q])
        if umbrales and theta <= umbrales[-1]:
            previo = umbrales[-1]
            theta = max(previo + HUECO_MINIMO, np.nextafter(previo, np.inf))
            # El umbral debe quedar por debajo del primer par del nivel siguiente.
            if q < len(d) and theta >= d[q]:
                theta = max(0.5 * (previo + d[q]), np.nextafter(previo, np.inf))
        umbrales.append(float(theta))
    return umbrales


def rating_function_to_line(func):
    """
    Serializa la función como `K theta_1 ... theta_{K-1}`.
    """
    return " ".join([str(func.K)] + [repr(t) for t in func.thetas])


def rating_function_from_line(linea):
    """
    Reconstruye una RatingFunction desde su línea de texto.

    Args:
        linea (str): Texto `K theta_1 ... theta_{K-1}`.

    Returns:
        RatingFunction: La función descrita.
    """
    partes = linea.split()
    if not partes:
        raise ErrorFuncionRating("línea de función de rating vacía")
    try:
        K = int(partes[0])
        thetas = [float(t) for t in partes[1:]]
    except ValueError as e:
        raise ErrorFuncionRating(f"línea de función de rating inválida: {linea!r}") from e
    return RatingFunction(K, thetas)
