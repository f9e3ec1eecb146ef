import json
import logging
import math
import sys
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from tqdm import tqdm

sys.path.append("src")

from model.embedding import Embedding, normalizar_en_sitio
from model.errores import ErrorMuestreo
from model.funcion_rating import eval_f, fit_rating_function, rating_function_to_line, sse
from model.matriz_ratings import distinct_levels

logger = logging.getLogger(__name__)

# sigma_r según la discretización de los ratings: binarios, 5 niveles y 21 niveles.
PRESETS_SIGMA_R = {
    "binario": 0.25,
    "cinco_niveles": 0.1,
    "veintiun_niveles": 0.05,
}


# Etiquetas de los flujos aleatorios que se derivan de una semilla. Cada consumidor usa
# la suya, así dos flujos con la misma semilla nunca coinciden.
FLUJO_SINTETICO = 1
FLUJO_EMBED = 2
FLUJO_PARTICION = 3
FLUJO_VARIANTE = 4


def flujo_aleatorio(semilla, etiqueta, *llave):
    """
    Generador derivado de `semilla` con (etiqueta, *llave) como `spawn_key` de
    SeedSequence. Una lista de enteros como semilla no sirve: numpy completa la
    entropía con ceros, y `[s, 0, 0]` da el mismo flujo que `s`.

    Args:
        semilla (int): Semilla no negativa.
        etiqueta (int): Consumidor del flujo (FLUJO_*).
        *llave (int): Índices adicionales (réplica, intento, semilla de la variante).

    Returns:
        np.random.Generator: Flujo independiente de los de otras etiquetas y llaves.
    """
    return np.random.default_rng(np.random.SeedSequence(semilla, spawn_key=(etiqueta, *llave)))


def sigma_r_para_niveles(K):
    """
    Elige el preset de sigma_r que corresponde a K niveles de rating.

    Args:
        K (int): Número de niveles de la función de rating.

    Returns:
        float: 0.25 para K <= 2, 0.1 para K <= 5, 0.05 en otro caso.
    """
    if K <= 2:
        return PRESETS_SIGMA_R["binario"]
    if K <= 5:
        return PRESETS_SIGMA_R["cinco_niveles"]
    return PRESETS_SIGMA_R["veintiun_niveles"]


@dataclass(frozen=True)
class SamplerConfig:
    """
    Parámetros del muestreador MH con recocido simulado dentro del ciclo EM.

    Las cuatro covarianzas (prior de usuarios, prior de items y las dos propuestas) son
    isotrópicas y se controlan con una desviación estándar escalar; por defecto todas
    son la identidad.
    """
    D: int = 2
    sigma_u: float = 1.0
    sigma_g: float = 1.0
    sigma_qu: float = 1.0
    sigma_qg: float = 1.0
    sigma_r: float | None = None  # None: se elige con sigma_r_para_niveles(K)
    l_b: int = 1000
    l_s: int = 2000
    epsilon: float = 0.02
    max_em_iters: int = 50
    stability_tol: float = 1e-3
    seed: int = 0
    anneal: bool = True
    budget_secs: float | None = 30.0
    normalize_stride: int = 1
    save_stride: int = 1
    num_niveles: int | None = None  # None: número de niveles distintos en los datos

    def __post_init__(self):
        for nombre in ("sigma_u", "sigma_g", "sigma_qu", "sigma_qg"):
            if not getattr(self, nombre) > 0:
                raise ErrorMuestreo(f"{nombre} debe ser positivo")
        if self.sigma_r is not None and not self.sigma_r > 0:
            raise ErrorMuestreo("sigma_r debe ser positivo")
        if self.D < 1:
            raise ErrorMuestreo("la dimensión D debe ser al menos 1")
        if self.l_b < 1 or self.l_s < 1:
            raise ErrorMuestreo("l_b y l_s deben ser al menos 1")
        if self.epsilon < 0:
            raise ErrorMuestreo("epsilon no puede ser negativo")
        if self.max_em_iters < 1:
            raise ErrorMuestreo("max_em_iters debe ser al menos 1")
        if self.stability_tol < 0:
            raise ErrorMuestreo("stability_tol no puede ser negativo")
        if self.normalize_stride < 1 or self.save_stride < 1:
            raise ErrorMuestreo("los intervalos de normalización y guardado deben ser al menos 1")
        if self.budget_secs is not None and not self.budget_secs > 0:
            raise ErrorMuestreo("budget_secs debe ser positivo o None")
        if self.num_niveles is not None and self.num_niveles < 2:
            raise ErrorMuestreo("num_niveles debe ser al menos 2")
        if self.seed < 0:
            raise ErrorMuestreo("la semilla no puede ser negativa")

    def resolver(self, K):
        """
        Configuración efectiva para K niveles: completa sigma_r y num_niveles.
        """
        return replace(
            self,
            sigma_r=self.sigma_r if self.sigma_r is not None else sigma_r_para_niveles(K),
            num_niveles=K,
        )


@dataclass
class AnnealState:
    """
    Temperatura de recocido. Con recocido, beta = (1 + epsilon)^t tras t iteraciones EM;
    sin recocido, beta se queda en 1.
    """
    beta: float = 1.0
    t: int = 0

    def avanzar(self, config):
        """
        Avanza una iteración EM.

        Args:
            config (SamplerConfig): Fuente de `anneal` y `epsilon`.
        """
        self.t += 1
        if config.anneal:
            self.beta = (1.0 + config.epsilon) ** self.t


@dataclass
class ReporteEjecucion:
    """
    Registro de una corrida de `run_em`: eco de la configuración efectiva y la
    trayectoria por iteración EM.
    """
    config: dict
    K: int
    m: int
    n: int
    num_ratings: int
    iteraciones: list = field(default_factory=list)
    funcion_final: str = ""
    motivo_parada: str = ""
    segundos: float = 0.0

    def to_dict(self):
        return asdict(self)

    def guardar_json(self, path, extra=None):
        """Escribe el reporte como JSON indentado; `extra` agrega claves al nivel superior."""
        with open(path, "w", encoding="utf-8") as archivo:
            json.dump({**self.to_dict(), **(extra or {})}, archivo, indent=2, sort_keys=True)
            archivo.write("\n")


def sample_prior(config, m, n, rng):
    """
    Muestra todos los puntos desde sus priors gaussianos isotrópicos de media cero.

    Args:
        config (SamplerConfig): Fuente de D, sigma_u y sigma_g.
        m (int): Número de usuarios.
        n (int): Número de items.
        rng (np.random.Generator): Flujo aleatorio.

    Returns:
        Embedding: Puntos sin normalizar.
    """
    usuarios = rng.normal(0.0, config.sigma_u, size=(m, config.D))
    items = rng.normal(0.0, config.sigma_g, size=(n, config.D))
    return Embedding(usuarios, items)


def _log_normal_isotropica(x, media, sigma):
    """Log-densidad de N(media, sigma^2 I) en x."""
    diferencia = x - media
    D = diferencia.shape[-1]
    return -float(diferencia @ diferencia) / (2.0 * sigma * sigma) - D * math.log(sigma * math.sqrt(2.0 * math.pi))


def _log_ganancia(actual, propuesto, vecinos, ratings, sigma_prior, sigma_propuesta, func, sigma_r, beta):
    """
    Log de la razón de ganancia de transición con temperatura beta, para un punto
    cuyos vecinos en el grafo son `vecinos` con ratings `ratings`.

    Returns:
        float: log Q(actual|propuesto) - log Q(propuesto|actual)
               + beta * [diferencia de log-prior + diferencia de log-verosimilitud].
    """
    origen = np.zeros_like(actual)
    log_q = (_log_normal_isotropica(actual, propuesto, sigma_propuesta)
             - _log_normal_isotropica(propuesto, actual, sigma_propuesta))
    log_prior = (_log_normal_isotropica(propuesto, origen, sigma_prior)
                 - _log_normal_isotropica(actual, origen, sigma_prior))

    log_verosimilitud = 0.0
    if len(ratings):
        d_nueva = np.sqrt(np.sum((vecinos - propuesto) ** 2, axis=1))
        d_vieja = np.sqrt(np.sum((vecinos - actual) ** 2, axis=1))
        error_viejo = (ratings - eval_f(func, d_vieja)) ** 2
        error_nuevo = (ratings - eval_f(func, d_nueva)) ** 2
        log_verosimilitud = float(np.sum(error_viejo - error_nuevo)) / (2.0 * sigma_r * sigma_r)

    return log_q + beta * (log_prior + log_verosimilitud)


def _sigma_r(config, func):
    return config.sigma_r if config.sigma_r is not None else sigma_r_para_niveles(func.K)


def log_gain_user(i, proposed, emb, matrix, func, config, beta):
    """
    Log de la razón de ganancia para mover el usuario i a `proposed`.

    Args:
        i (int): Índice del usuario.
        proposed (np.ndarray): Posición propuesta (dimensión D).
        emb (Embedding): Estado actual.
        matrix (RatingMatrix): Ratings observados.
        func (RatingFunction): Función de rating actual.
        config (SamplerConfig): Desviaciones del prior, la propuesta y sigma_r.
        beta (float): Temperatura de recocido (>= 1).

    Returns:
        float: Log de la razón de ganancia.
    """
    vecinos = emb.items[matrix.items_por_usuario[i]]
    return _log_ganancia(
        emb.usuarios[i], np.asarray(proposed, dtype=float), vecinos, matrix.ratings_usuario(i),
        config.sigma_u, config.sigma_qu, func, _sigma_r(config, func), beta,
    )


def log_gain_item(j, proposed, emb, matrix, func, config, beta):
    """
    Log de la razón de ganancia para mover el item j a `proposed` (espejo de
    `log_gain_user` con U^j y el prior de items).
    """
    vecinos = emb.usuarios[matrix.usuarios_por_item[j]]
    return _log_ganancia(
        emb.items[j], np.asarray(proposed, dtype=float), vecinos, matrix.ratings_item(j),
        config.sigma_g, config.sigma_qg, func, _sigma_r(config, func), beta,
    )


def mh_step(emb, matrix, func, config, beta, rng):
    """
    Un paso de Metropolis-Hastings: elige un punto al azar entre los m + n, propone una
    posición gaussiana centrada en la actual y la acepta con probabilidad
    min{1, exp(log ganancia)}. El embedding se actualiza en sitio.

    Args:
        emb (Embedding): Estado actual (se modifica si se acepta).
        matrix (RatingMatrix): Ratings observados.
        func (RatingFunction): Función de rating actual.
        config (SamplerConfig): Parámetros del muestreador.
        beta (float): Temperatura de recocido.
        rng (np.random.Generator): Flujo aleatorio.

    Returns:
        tuple: (emb, aceptado).
    """
    k = int(rng.integers(emb.m + emb.n))
    es_usuario = k < emb.m
    sigma_q = config.sigma_qu if es_usuario else config.sigma_qg
    propuesto = emb.puntos[k] + rng.normal(0.0, sigma_q, size=emb.D)

    if es_usuario:
        log_ganancia = log_gain_user(k, propuesto, emb, matrix, func, config, beta)
    else:
        log_ganancia = log_gain_item(k - emb.m, propuesto, emb, matrix, func, config, beta)
    if not math.isfinite(log_ganancia):
        raise ErrorMuestreo(
            f"razón de ganancia no finita para el punto {k} ({'usuario' if es_usuario else 'item'}), beta={beta}"
        )

    # log(1 - u) está en (-inf, 0]: nunca es log(0).
    aceptado = log_ganancia >= 0 or math.log1p(-rng.random()) < log_ganancia
    if aceptado:
        emb.puntos[k] = propuesto
    return emb, aceptado


def _niveles_para(matrix, config):
    if len(matrix) == 0:
        raise ErrorMuestreo("la matriz de ratings está vacía")
    K = config.num_niveles if config.num_niveles is not None else len(distinct_levels(matrix))
    if K < 2:
        raise ErrorMuestreo(f"se necesitan al menos 2 niveles de rating distintos (hay {K})")
    return K


def run_em(matrix, config, rng=None, progreso=False):
    """
    Ciclo EM completo: E-step con MH (y recocido) sobre el posterior del embedding,
    M-step con el ajuste exacto de la función de rating sobre los pares guardados.

    Args:
        matrix (RatingMatrix): Ratings de entrenamiento.
        config (SamplerConfig): Parámetros del muestreador.
        rng (np.random.Generator, optional): Flujo aleatorio; por defecto uno sembrado con `config.seed`.
        progreso (bool): Muestra una barra de progreso por iteración EM.

    Returns:
        tuple: (Embedding final normalizado, RatingFunction final, ReporteEjecucion).
    """
    inicio = time.perf_counter()
    K = _niveles_para(matrix, config)
    config = config.resolver(K)
    if rng is None:
        rng = flujo_aleatorio(config.seed, FLUJO_EMBED)

    reporte = ReporteEjecucion(config=asdict(config), K=K, m=matrix.m, n=matrix.n, num_ratings=len(matrix))

    # Estado inicial desde los priors; Theta^0 sale de un M-step sobre esa muestra.
    emb = sample_prior(config, matrix.m, matrix.n, rng)
    emb = Embedding(emb.usuarios, emb.items, matrix.ids_usuarios, matrix.ids_items)
    normalizar_en_sitio(emb.puntos)
    func = fit_rating_function((emb.distancias(matrix.usuarios, matrix.items), matrix.ratings), K)

    temperatura = AnnealState()
    pasos = config.l_b + config.l_s
    num_guardadas = -(-config.l_s // config.save_stride)
    guardadas = np.empty((num_guardadas, len(matrix)))
    ratings_agrupados = np.tile(matrix.ratings, num_guardadas)
    mse_previo = None
    reporte.motivo_parada = "max_em_iters"

    for iteracion in tqdm(range(config.max_em_iters), desc="EM", disable=not progreso, leave=False):
        beta = temperatura.beta
        aceptados = 0
        fila = 0
        # E-step
        for k in range(1, pasos + 1):
            _, aceptado = mh_step(emb, matrix, func, config, beta, rng)
            aceptados += aceptado
            if k > config.l_b and (k - config.l_b - 1) % config.save_stride == 0:
                guardadas[fila] = emb.distancias(matrix.usuarios, matrix.items)
                fila += 1
            if k % config.normalize_stride == 0:
                normalizar_en_sitio(emb.puntos)

        temperatura.avanzar(config)

        # M-step sobre todos los pares guardados (N = muestras x |R|).
        distancias = guardadas.reshape(-1)
        if not np.all(np.isfinite(distancias)):
            raise ErrorMuestreo(f"distancias no finitas en la iteración EM {iteracion}")
        sse_antes = sse(func, (distancias, ratings_agrupados))
        func = fit_rating_function((distancias, ratings_agrupados), K)
        sse_despues = sse(func, (distancias, ratings_agrupados))
        mse = sse_despues / len(distancias)

        reporte.iteraciones.append({
            "iteracion": iteracion,
            "beta": beta,
            "tasa_aceptacion": aceptados / pasos,
            "sse_antes": sse_antes,
            "sse_despues": sse_despues,
            "mse": mse,
            "thetas": list(func.thetas),
        })
        logger.debug(
            "EM %d: beta=%.4f aceptación=%.3f mse=%.5f", iteracion, beta, aceptados / pasos, mse
        )

        if mse_previo is not None:
            cambio = abs(mse - mse_previo) / mse_previo if mse_previo > 0 else abs(mse - mse_previo)
            if cambio < config.stability_tol:
                reporte.motivo_parada = "estable"
                break
        mse_previo = mse
        if config.budget_secs is not None and time.perf_counter() - inicio >= config.budget_secs:
            reporte.motivo_parada = "presupuesto"
            logger.warning(
                "EM detenido por presupuesto de tiempo (%.1f s) tras %d iteraciones; el resultado depende "
                "de la velocidad de la máquina. Para corridas reproducibles use --budget-secs mayor o "
                "budget_secs: null en la configuración",
                config.budget_secs, len(reporte.iteraciones),
            )
            break

    normalizar_en_sitio(emb.puntos)
    reporte.funcion_final = rating_function_to_line(func)
    reporte.segundos = time.perf_counter() - inicio
    logger.info(
        "EM terminado tras %d iteraciones (%s): mse=%.5f, f=%s",
        len(reporte.iteraciones), reporte.motivo_parada, reporte.iteraciones[-1]["mse"], reporte.funcion_final,
    )
    return emb, func, reporte


def random_embedding(m, n, D, rng, ids_usuarios=None, ids_items=None):
    """
    Embedding de referencia aleatorio: puntos desde priors estándar, normalizados.

    Args:
        m (int): Número de usuarios.
        n (int): Número de items.
        D (int): Dimensión.
        rng (np.random.Generator): Flujo aleatorio.

    Returns:
        Embedding: Embedding normalizado sin relación con los ratings.
    """
    emb = sample_prior(SamplerConfig(D=D), m, n, rng)
    emb = Embedding(emb.usuarios, emb.items, ids_usuarios, ids_items)
    normalizar_en_sitio(emb.puntos)
    return emb
