import functools
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import pandas as pd

sys.path.append("src")

from ia.imputacion import augment, export_dense, fill_linear_regression, item_correlation
from ia.muestreador_mcmc import FLUJO_EMBED, ReporteEjecucion, flujo_aleatorio
from model.embedding import export_embedding, load_embedding
from model.errores import ErrorConfiguracion, ErrorEmbedding
from model.funcion_rating import rating_function_to_line
from model.matriz_ratings import density, export_triplets, load_labels, load_triplets
from utils.experimentos import (
    configs_por_defecto,
    ejecutar_variante,
    export_sweep,
    generate_synthetic,
    run_dimension_sweep,
    run_experiment,
    run_size_sweep,
)
from utils.graficos import construir_figura, guardar_svg

logger = logging.getLogger(__name__)

# Nombres de los archivos de salida dentro de output_dir.
ARCHIVO_EMBEDDING = "embedding.tsv"
ARCHIVO_REPORTE = "run_report.json"
ARCHIVO_EVAL_JSON = "eval_report.json"
ARCHIVO_EVAL_CSV = "eval_report.csv"
ARCHIVO_BARRIDO_TAMANO = "size_sweep.csv"
ARCHIVO_BARRIDO_DIM = "dim_sweep.csv"
ARCHIVO_RATINGS = "ratings.csv"
ARCHIVO_MAPEO = "mapping.csv"
ARCHIVO_PLANTADO = "planted_embedding.tsv"
ARCHIVO_FUNCION = "planted_function.txt"
ARCHIVO_SVG = "embedding.svg"
ARCHIVO_DENSO = "dense.tsv"
ARCHIVO_MASCARA = "dense_mask.tsv"
ARCHIVO_AUMENTADO = "augmented.tsv"


def con_estado(comando):
    """
    Convierte un comando en una función que devuelve el código de salida: 0 si termina,
    1 si falla con un error de la librería o de archivos (el mensaje queda en el log).
    """
    @functools.wraps(comando)
    def envoltura(config):
        try:
            comando(config)
        except (ErrorEmbedding, OSError) as e:
            logger.error("%s: %s", comando.__name__, e)
            return 1
        return 0
    return envoltura


def _entrada(config):
    if config.input is None:
        raise ErrorConfiguracion("falta el archivo de entrada (--input)")
    ruta = Path(config.input)
    if not ruta.is_file():
        raise ErrorConfiguracion(f"no existe el archivo de entrada: {ruta}")
    return ruta


def _salida(config):
    carpeta = Path(config.output_dir)
    carpeta.mkdir(parents=True, exist_ok=True)
    return carpeta


def _cargar_ratings(config):
    matriz = load_triplets(_entrada(config), config.scale, config.mapping)
    logger.info("Densidad de la matriz: %.4f", density(matriz))
    return matriz


def _variante_embed(config):
    """Variante de `embed`: la única pedida con --variant, o MCMC según --no-anneal."""
    if len(config.variants) == 1:
        return config.variants[0]
    return "mcmc-sa" if config.sampler.anneal else "mcmc"


@con_estado
def cmd_embed(config):
    """
    Calcula el embedding de un CSV de ratings.

    Escribe `embedding.tsv` (m + n filas) y `run_report.json` con la configuración
    efectiva, la trayectoria EM, la configuración de la corrida para repetirla y
    `reproducible`, falso si el presupuesto de tiempo cortó el EM.

    Args:
        config (RunConfig): Configuración de la ejecución.
    """
    matriz = _cargar_ratings(config)
    variante = _variante_embed(config)
    sampler = configs_por_defecto(config.sampler)[variante]
    rng = flujo_aleatorio(sampler.seed, FLUJO_EMBED)
    if sampler.budget_secs is not None and variante != "random":
        logger.debug(
            "budget_secs=%s: si el presupuesto corta el EM, dos corridas con la misma semilla pueden "
            "diferir; use --budget-secs mayor o budget_secs: null para resultados idénticos",
            sampler.budget_secs,
        )

    emb, reporte = ejecutar_variante(variante, matriz, sampler, rng)
    if reporte is None:
        reporte = ReporteEjecucion(
            config=asdict(sampler), K=0, m=matriz.m, n=matriz.n, num_ratings=len(matriz),
            motivo_parada="aleatorio",
        )

    carpeta = _salida(config)
    export_embedding(emb, carpeta / ARCHIVO_EMBEDDING)
    reporte.guardar_json(carpeta / ARCHIVO_REPORTE, extra={
        "variant": variante,
        "reproducible": reporte.motivo_parada != "presupuesto",
        "run_config": config.to_dict(),
    })
    logger.info("Embedding (%s) escrito en %s", variante, carpeta / ARCHIVO_EMBEDDING)


@con_estado
def cmd_eval(config):
    """
    Corre el experimento de réplicas con las variantes elegidas y, si se piden, los
    barridos por tamaño de entrenamiento (--train-sizes) y por dimensión (--dims).

    Args:
        config (RunConfig): Configuración de la ejecución.
    """
    matriz = _cargar_ratings(config)
    base = configs_por_defecto(config.sampler)
    configs = {v: base[v] for v in config.variants}
    carpeta = _salida(config)

    reporte = run_experiment(matriz, config.split, configs, workers=config.workers, progreso=True)
    reporte.guardar_json(carpeta / ARCHIVO_EVAL_JSON, extra={"run_config": config.to_dict()})
    reporte.guardar_csv(carpeta / ARCHIVO_EVAL_CSV)
    logger.info("Reporte de evaluación escrito en %s", carpeta / ARCHIVO_EVAL_JSON)

    if config.train_sizes:
        barrido = run_size_sweep(matriz, config.split, configs, config.train_sizes, config.workers, progreso=True)
        export_sweep(barrido, "train_size", carpeta / ARCHIVO_BARRIDO_TAMANO)
        logger.info("Barrido por tamaño escrito en %s", carpeta / ARCHIVO_BARRIDO_TAMANO)
    if config.dims:
        barrido = run_dimension_sweep(matriz, config.split, configs, config.dims, config.workers, progreso=True)
        export_sweep(barrido, "dim", carpeta / ARCHIVO_BARRIDO_DIM)
        logger.info("Barrido por dimensión escrito en %s", carpeta / ARCHIVO_BARRIDO_DIM)


@con_estado
def cmd_synth(config):
    """
    Genera una instancia sintética con embedding plantado: el CSV de ratings con su
    mapeo, el embedding plantado y la línea de la función de rating plantada.
    """
    s = config.synth
    matriz, plantado, func = generate_synthetic(
        s.users, s.items, config.sampler.D, s.levels, s.density, s.noise_sd, config.sampler.seed
    )
    carpeta = _salida(config)
    export_triplets(matriz, carpeta / ARCHIVO_RATINGS, carpeta / ARCHIVO_MAPEO)
    export_embedding(plantado, carpeta / ARCHIVO_PLANTADO)
    (carpeta / ARCHIVO_FUNCION).write_text(rating_function_to_line(func) + "\n", encoding="utf-8")
    logger.info("Instancia sintética (m=%d, n=%d, |R|=%d) escrita en %s", matriz.m, matriz.n, len(matriz), carpeta)


@con_estado
def cmd_plot(config):
    """
    Dibuja un embedding 2D (--input apunta al TSV del embedding) como SVG, con las
    categorías de --labels si se entregan.
    """
    emb = load_embedding(_entrada(config))
    etiquetas = load_labels(config.labels) if config.labels else None
    fig = construir_figura(emb, etiquetas, config.plot)
    guardar_svg(fig, _salida(config) / ARCHIVO_SVG)


@con_estado
def cmd_impute(config):
    """
    Completa la matriz por regresión lineal y escribe la matriz densa, su máscara de
    procedencia y la matriz aumentada [C; R] para métodos externos.
    """
    matriz = _cargar_ratings(config)
    completa = fill_linear_regression(matriz)
    aumentada = augment(completa, item_correlation(completa))

    carpeta = _salida(config)
    export_dense(completa, carpeta / ARCHIVO_DENSO, carpeta / ARCHIVO_MASCARA)
    filas = [f"item:{g}" for g in completa.ids_items] + [f"user:{u}" for u in completa.ids_usuarios]
    pd.DataFrame(aumentada, index=filas, columns=list(completa.ids_items)).to_csv(
        carpeta / ARCHIVO_AUMENTADO, sep="\t", index_label="row"
    )
    logger.info("Matrices imputadas escritas en %s", carpeta)


COMANDOS = {
    "embed": cmd_embed,
    "eval": cmd_eval,
    "synth": cmd_synth,
    "plot": cmd_plot,
    "impute": cmd_impute,
}
