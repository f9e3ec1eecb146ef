import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd
from tqdm import tqdm

sys.path.append("src")

from ia.imputacion import fill_linear_regression
from ia.muestreador_mcmc import (
    FLUJO_PARTICION,
    FLUJO_SINTETICO,
    FLUJO_VARIANTE,
    SamplerConfig,
    flujo_aleatorio,
    random_embedding,
    run_em,
)
from model.embedding import Embedding, normalizar_en_sitio
from model.errores import ErrorEvaluacion
from model.funcion_rating import RatingFunction, eval_f, niveles_rating
from model.matriz_ratings import RatingMatrix, RatingScale, distinct_levels
from utils.evaluacion import ideal_tau, score_embedding

logger = logging.getLogger(__name__)

VARIANTES = ("mcmc", "mcmc-sa", "mcmc-reg", "random")
# Intentos de partición por réplica antes de abortar por falta de pares de prueba.
MAX_INTENTOS_PARTICION = 10


@dataclass(frozen=True)
class SplitSpec:
    """
    Diseño de la partición de prueba.

    Args:
        test_user_fraction (float): Fracción de usuarios reservados para prueba.
        test_item_fraction (float): Fracción de items reservados para prueba.
        train_size (int, optional): Número de items de entrenamiento; None usa todos los restantes.
        train_user_size (int, optional): Número de usuarios de entrenamiento; None lo escala
            con train_size en proporción a los usuarios e items restantes.
        replicas (int): Número de réplicas independientes.
        seed (int): Semilla base de las réplicas.
    """
    test_user_fraction: float = 0.25
    test_item_fraction: float = 0.25
    train_size: int | None = None
    train_user_size: int | None = None
    replicas: int = 25
    seed: int = 0

    def __post_init__(self):
        for nombre in ("test_user_fraction", "test_item_fraction"):
            valor = getattr(self, nombre)
            if not 0 < valor < 1:
                raise ErrorEvaluacion(f"{nombre} debe estar en (0, 1), recibido {valor}")
        if self.replicas < 1:
            raise ErrorEvaluacion("replicas debe ser al menos 1")
        if self.train_size is not None and self.train_size < 1:
            raise ErrorEvaluacion("train_size debe ser al menos 1")
        if self.train_user_size is not None and self.train_user_size < 1:
            raise ErrorEvaluacion("train_user_size debe ser al menos 1")
        if self.seed < 0:
            raise ErrorEvaluacion("la semilla no puede ser negativa")


@dataclass
class EvalReport:
    """
    Resultados por réplica de cada variante, la cota ideal y los agregados.
    """
    variantes: list
    tau: dict = field(default_factory=dict)
    ideal: list = field(default_factory=list)
    num_pares_prueba: list = field(default_factory=list)

    def agregar(self, resultado):
        """Incorpora el resultado de una réplica (en orden de réplica)."""
        for variante in self.variantes:
            self.tau.setdefault(variante, []).append(resultado["tau"][variante])
        self.ideal.append(resultado["ideal"])
        self.num_pares_prueba.append(resultado["num_pares"])

    def resumen(self):
        """
        Media y desviación estándar muestral por variante (incluye "ideal").

        Returns:
            dict: variante -> {"media": float, "desviacion": float}.
        """
        series = dict(self.tau)
        series["ideal"] = self.ideal
        return {nombre: _media_desviacion(valores) for nombre, valores in series.items()}

    def to_dict(self):
        return {
            "variantes": list(self.variantes),
            "tau": {v: list(self.tau[v]) for v in self.variantes},
            "ideal": list(self.ideal),
            "num_pares_prueba": list(self.num_pares_prueba),
            "resumen": self.resumen(),
        }

    def tabla(self):
        """DataFrame plano `variant,replica,tau,ideal_tau`."""
        filas = [
            (variante, r, tau, self.ideal[r])
            for variante in self.variantes
            for r, tau in enumerate(self.tau[variante])
        ]
        return pd.DataFrame(filas, columns=["variant", "replica", "tau", "ideal_tau"])

    def guardar_json(self, path, extra=None):
        with open(path, "w", encoding="utf-8") as archivo:
            json.dump({**self.to_dict(), **(extra or {})}, archivo, indent=2, sort_keys=True)
            archivo.write("\n")

    def guardar_csv(self, path):
        self.tabla().to_csv(path, index=False)


def _media_desviacion(valores):
    valores = np.asarray(valores, dtype=float)
    desviacion = float(np.std(valores, ddof=1)) if len(valores) > 1 else 0.0
    return {"media": float(np.mean(valores)), "desviacion": desviacion}


def _tamano_prueba(fraccion, total, nombre):
    tamano = max(1, int(round(fraccion * total)))
    if tamano >= total:
        raise ErrorEvaluacion(f"no quedan {nombre} para entrenamiento ({total} en total)")
    return tamano


def make_split(matrix, spec, rng):
    """
    Partición de prueba: primero se eligen los usuarios y los items de prueba, luego
    los de entrenamiento entre los restantes. Los ratings entre usuarios de prueba e
    items de prueba se reservan; el resto de los ratings entre puntos seleccionados
    se usa para entrenar. Usuarios o items sin ratings de entrenamiento se eliminan.

    Args:
        matrix (RatingMatrix): Matriz completa del experimento.
        spec (SplitSpec): Diseño de la partición.
        rng (np.random.Generator): Flujo aleatorio de la réplica.

    Returns:
        tuple: (RatingMatrix de entrenamiento, arreglo k x 3 de pares de prueba (i, j, r)
               con índices de la matriz de entrenamiento).
    """
    n_prueba_u = _tamano_prueba(spec.test_user_fraction, matrix.m, "usuarios")
    n_prueba_g = _tamano_prueba(spec.test_item_fraction, matrix.n, "items")

    perm_u = rng.permutation(matrix.m)
    perm_g = rng.permutation(matrix.n)
    prueba_u, resto_u = perm_u[:n_prueba_u], perm_u[n_prueba_u:]
    prueba_g, resto_g = perm_g[:n_prueba_g], perm_g[n_prueba_g:]

    n_entreno_g = len(resto_g) if spec.train_size is None else spec.train_size
    if n_entreno_g > len(resto_g):
        raise ErrorEvaluacion(f"train_size={n_entreno_g} supera los {len(resto_g)} items disponibles")
    if spec.train_user_size is not None:
        n_entreno_u = spec.train_user_size
    elif spec.train_size is not None:
        n_entreno_u = int(round(spec.train_size * len(resto_u) / len(resto_g)))
    else:
        n_entreno_u = len(resto_u)
    n_entreno_u = min(max(n_entreno_u, 1), len(resto_u))

    # Rol de cada punto: 0 fuera del experimento, 1 prueba, 2 entrenamiento.
    rol_u = np.zeros(matrix.m, dtype=np.int8)
    rol_u[prueba_u] = 1
    rol_u[resto_u[:n_entreno_u]] = 2
    rol_g = np.zeros(matrix.n, dtype=np.int8)
    rol_g[prueba_g] = 1
    rol_g[resto_g[:n_entreno_g]] = 2

    ru = rol_u[matrix.usuarios]
    rg = rol_g[matrix.items]
    en_prueba = (ru == 1) & (rg == 1)
    en_entreno = (ru > 0) & (rg > 0) & ~en_prueba

    if en_prueba.sum() < 2:
        raise ErrorEvaluacion("la partición dejó menos de 2 ratings de prueba")

    entreno, mapa_u, mapa_g = matrix.filtrar(en_entreno)

    eliminados_u = int(np.sum((rol_u > 0) & (mapa_u < 0)))
    eliminados_g = int(np.sum((rol_g > 0) & (mapa_g < 0)))
    if eliminados_u or eliminados_g:
        logger.warning(
            "Se eliminaron %d usuarios y %d items sin ratings de entrenamiento", eliminados_u, eliminados_g
        )

    i = mapa_u[matrix.usuarios[en_prueba]]
    j = mapa_g[matrix.items[en_prueba]]
    validos = (i >= 0) & (j >= 0)
    pares = np.column_stack([i[validos], j[validos], matrix.ratings[en_prueba][validos]]).astype(float)
    if len(pares) < 2:
        raise ErrorEvaluacion("menos de 2 pares de prueba tras eliminar puntos sin entrenamiento")
    return entreno, pares


def _umbrales_equiprobables(distancias, K):
    """
    Umbrales que reparten las distancias en K grupos de igual tamaño. Cada umbral cae
    en el punto medio entre dos distancias consecutivas ordenadas, nunca sobre una
    distancia, y se fuerza a ser positivo y estrictamente creciente.
    """
    d = np.sort(np.asarray(distancias, dtype=float).reshape(-1))
    N = len(d)
    thetas = []
    for nivel in range(1, K):
        corte = min(max(int(round(nivel * N / K)), 1), N - 1) if N > 1 else 1
        q = 0.5 * (d[corte - 1] + d[corte]) if N > 1 else d[0] * nivel
        q = float(q)
        if thetas and q <= thetas[-1]:
            q = float(np.nextafter(thetas[-1], np.inf))
        if q <= 0:
            q = float(np.nextafter(0.0, 1.0))
        thetas.append(q)
    return thetas


def generate_synthetic(m, n, D, K, density, noise_sd, seed):
    """
    Genera una instancia con embedding plantado para pruebas de recuperación.

    Los puntos salen de priors normales estándar y se normalizan. Cada par usuario-item
    se observa con probabilidad `density`; los umbrales dejan la misma cantidad de pares
    observados en cada nivel. Cada rating es f(distancia) más ruido gaussiano,
    recuantizado al nivel más cercano.

    Args:
        m (int): Número de usuarios.
        n (int): Número de items.
        D (int): Dimensión del embedding plantado.
        K (int): Niveles de rating.
        density (float): Probabilidad de observar cada rating, en (0, 1].
        noise_sd (float): Desviación del ruido antes de recuantizar.
        seed (int): Semilla.

    Returns:
        tuple: (RatingMatrix, Embedding plantado, RatingFunction plantada).
    """
    if m < 1 or n < 1 or D < 1 or m + n < 2:
        raise ErrorEvaluacion(f"tamaños degenerados: m={m}, n={n}, D={D}")
    if K < 2:
        raise ErrorEvaluacion("K debe ser al menos 2")
    if not 0 < density <= 1:
        raise ErrorEvaluacion("density debe estar en (0, 1]")
    if noise_sd < 0:
        raise ErrorEvaluacion("noise_sd no puede ser negativo")
    if seed < 0:
        raise ErrorEvaluacion("la semilla no puede ser negativa")

    rng = flujo_aleatorio(seed, FLUJO_SINTETICO)
    ids_usuarios = [f"u{i}" for i in range(m)]
    ids_items = [f"g{j}" for j in range(n)]
    plantado = Embedding(rng.normal(size=(m, D)), rng.normal(size=(n, D)), ids_usuarios, ids_items)
    normalizar_en_sitio(plantado.puntos)

    conservar = rng.random((m, n)) < density
    usuarios, items = np.nonzero(conservar)
    if len(usuarios) == 0:
        raise ErrorEvaluacion("la instancia sintética quedó sin ratings; aumente density")

    filas, columnas = np.indices((m, n))
    distancias = plantado.distancias(filas.reshape(-1), columnas.reshape(-1)).reshape(m, n)
    func = RatingFunction(K, _umbrales_equiprobables(distancias[conservar], K))

    ratings = eval_f(func, distancias)
    if noise_sd > 0:
        ratings = ratings + rng.normal(0.0, noise_sd, size=ratings.shape)
        nivel = np.clip(np.rint((1.0 - ratings) * (K - 1)), 0, K - 1).astype(int)
        ratings = niveles_rating(K)[nivel]

    escala = RatingScale(0.0, 1.0, 1.0 / (K - 1))
    matriz = RatingMatrix(usuarios, items, ratings[usuarios, items], escala, ids_usuarios, ids_items)
    return matriz, plantado, func


def configs_por_defecto(base=None):
    """
    Configuraciones de las cuatro variantes a partir de una configuración base.

    Args:
        base (SamplerConfig, optional): Configuración común; por defecto la de fábrica.

    Returns:
        dict: variante -> SamplerConfig.
    """
    base = base or SamplerConfig()
    return {
        "mcmc": replace(base, anneal=False),
        "mcmc-sa": replace(base, anneal=True),
        "mcmc-reg": replace(base, anneal=True),
        "random": base,
    }


def ejecutar_variante(variante, entreno, config, rng):
    """
    Corre una variante sobre una matriz de ratings.

    Args:
        variante (str): "mcmc", "mcmc-sa", "mcmc-reg" o "random".
        entreno (RatingMatrix): Ratings de entrenamiento.
        config (SamplerConfig): Configuración de la variante.
        rng (np.random.Generator): Flujo aleatorio.

    Returns:
        tuple: (Embedding, ReporteEjecucion o None para "random").
    """
    if variante == "random":
        emb = random_embedding(entreno.m, entreno.n, config.D, rng, entreno.ids_usuarios, entreno.ids_items)
        return emb, None
    if variante == "mcmc-reg":
        completa = fill_linear_regression(entreno)
        K = config.num_niveles or len(distinct_levels(entreno))
        emb, _, reporte = run_em(completa.como_matriz(), replace(config, num_niveles=K), rng)
        return emb, reporte
    if variante in ("mcmc", "mcmc-sa"):
        emb, _, reporte = run_em(entreno, config, rng)
        return emb, reporte
    raise ErrorEvaluacion(f"variante desconocida: {variante}")


def _correr_replica(matrix, spec, configs, replica):
    """
    Una réplica completa: partición, todas las variantes sobre la misma partición y tau ideal.

    Returns:
        dict: {"tau": variante -> tau, "ideal": float, "num_pares": int}.
    """
    for intento in range(MAX_INTENTOS_PARTICION):
        try:
            entreno, pares = make_split(matrix, spec, flujo_aleatorio(spec.seed, FLUJO_PARTICION, replica, intento))
            break
        except ErrorEvaluacion as e:
            logger.warning("Réplica %d, intento %d: %s; se vuelve a particionar", replica, intento, e)
    else:
        raise ErrorEvaluacion(f"réplica {replica}: sin partición válida tras {MAX_INTENTOS_PARTICION} intentos")

    resultado = {"tau": {}, "ideal": ideal_tau(pares[:, 2]), "num_pares": int(len(pares))}
    for variante, config in configs.items():
        # Mismo flujo para todas las variantes de la réplica (números aleatorios comunes).
        rng = flujo_aleatorio(spec.seed, FLUJO_VARIANTE, replica, config.seed)
        try:
            emb, _ = ejecutar_variante(variante, entreno, config, rng)
        except Exception as e:
            raise ErrorEvaluacion(f"réplica {replica}, variante {variante}: {e}") from e
        resultado["tau"][variante] = score_embedding(emb, pares)
    logger.debug("Réplica %d: %s (ideal %.4f)", replica, resultado["tau"], resultado["ideal"])
    return resultado


def run_experiment(matrix, spec, configs=None, workers=1, progreso=False):
    """
    Corre todas las réplicas del experimento y agrega los resultados.

    Cada réplica usa su propio flujo aleatorio derivado de (seed, réplica), así que el
    reporte es el mismo con uno o varios procesos.

    Args:
        matrix (RatingMatrix): Matriz completa.
        spec (SplitSpec): Diseño de la partición y número de réplicas.
        configs (dict, optional): variante -> SamplerConfig; por defecto las cuatro variantes.
        workers (int): Procesos en paralelo (1 = secuencial).
        progreso (bool): Muestra barra de progreso por réplica.

    Returns:
        EvalReport: Resultados por réplica y agregados.
    """
    configs = configs or configs_por_defecto()
    reporte = EvalReport(variantes=list(configs))
    replicas = range(spec.replicas)

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futuros = [pool.submit(_correr_replica, matrix, spec, configs, r) for r in replicas]
            for futuro in tqdm(futuros, desc="Réplicas", disable=not progreso):
                reporte.agregar(futuro.result())
    else:
        for r in tqdm(replicas, desc="Réplicas", disable=not progreso):
            reporte.agregar(_correr_replica(matrix, spec, configs, r))

    for variante, estadisticas in reporte.resumen().items():
        logger.info("%-9s tau medio = %+.4f (± %.4f)", variante, estadisticas["media"], estadisticas["desviacion"])
    return reporte


def run_size_sweep(matrix, spec, configs, sizes, workers=1, progreso=False):
    """
    Tau de prueba en función del número de items de entrenamiento.

    Returns:
        dict: tamaño -> EvalReport.
    """
    return {
        tamano: run_experiment(matrix, replace(spec, train_size=tamano), configs, workers, progreso)
        for tamano in sizes
    }


def run_dimension_sweep(matrix, spec, configs, dims, workers=1, progreso=False):
    """
    Tau de prueba en función de la dimensión del embedding, usando todos los datos
    restantes para entrenar.

    Returns:
        dict: dimensión -> EvalReport.
    """
    spec = replace(spec, train_size=None, train_user_size=None)
    configs = configs or configs_por_defecto()
    return {
        D: run_experiment(matrix, spec, {v: replace(c, D=D) for v, c in configs.items()}, workers, progreso)
        for D in dims
    }


def export_sweep(resultados, eje, path):
    """
    Escribe un barrido como CSV `axis,value,variant,replica,tau,ideal_tau`.

    Args:
        resultados (dict): valor del eje -> EvalReport.
        eje (str): Nombre del eje ("train_size" o "dim").
        path (str | Path): Archivo de destino.
    """
    tablas = []
    for valor, reporte in resultados.items():
        tabla = reporte.tabla()
        tabla.insert(0, "value", valor)
        tabla.insert(0, "axis", eje)
        tablas.append(tabla)
    pd.concat(tablas, ignore_index=True).to_csv(path, index=False)
