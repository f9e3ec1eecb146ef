import argparse
import logging
import sys

sys.path.append("src")

from model.errores import ErrorEmbedding
from utils.configuracion import RunConfig
from utils.experimentos import VARIANTES
from utils.modos_ejecucion import COMANDOS
from utils.registro import configurar_registro, nivel_desde_flags

logger = logging.getLogger("embedding")


def _flags_comunes(parser):
    """Flags compartidos por todos los subcomandos. Los omitidos quedan en None."""
    parser.add_argument("--input", help="CSV de ratings (o TSV del embedding para plot)")
    parser.add_argument("--output-dir", help="carpeta de salida")
    parser.add_argument("--config", help="archivo JSON de configuración (los flags ganan)")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--verbose", action="store_true", help="log en nivel DEBUG")
    parser.add_argument("--quiet", action="store_true", help="solo advertencias y errores")


def _flags_datos(parser):
    parser.add_argument("--scale", type=float, nargs=3, metavar=("MIN", "MAX", "STEP"),
                        help="escala declarada de los ratings crudos (STEP 0 = continua)")
    parser.add_argument("--mapping", help="archivo de mapeo index,original_id,kind")


def _flags_muestreador(parser):
    parser.add_argument("--dim", type=int, help="dimensión D del embedding")
    parser.add_argument("--variant", action="append", choices=VARIANTES,
                        help="variante (repetible en eval)")
    parser.add_argument("--budget-secs", type=float, help="tiempo máximo por corrida EM")
    parser.add_argument("--no-anneal", action="store_true", help="beta fijo en 1")
    parser.add_argument("--sigma-r", type=float)
    parser.add_argument("--l-b", type=int, help="pasos de calentamiento por iteración EM")
    parser.add_argument("--l-s", type=int, help="pasos guardados por iteración EM")
    parser.add_argument("--epsilon", type=float, help="tasa de recocido")
    parser.add_argument("--max-em-iters", type=int)


def construir_parser():
    """
    Parser de línea de comandos con los subcomandos embed, eval, synth, plot e impute.

    Returns:
        argparse.ArgumentParser: Parser listo para usar.
    """
    parser = argparse.ArgumentParser(
        prog="main.py",
        description="Embedding euclidiano de usuarios e items desde ratings colaborativos",
    )
    sub = parser.add_subparsers(dest="comando", required=True)

    embed = sub.add_parser("embed", help="calcula el embedding de un CSV de ratings")
    _flags_comunes(embed)
    _flags_datos(embed)
    _flags_muestreador(embed)

    evaluar = sub.add_parser("eval", help="experimento de réplicas con tau de Kendall")
    _flags_comunes(evaluar)
    _flags_datos(evaluar)
    _flags_muestreador(evaluar)
    evaluar.add_argument("--replicas", type=int)
    evaluar.add_argument("--train-size", type=int, help="items de entrenamiento por réplica")
    evaluar.add_argument("--train-sizes", type=int, nargs="+", help="barrido por tamaño de entrenamiento")
    evaluar.add_argument("--dims", type=int, nargs="+", help="barrido por dimensión")
    evaluar.add_argument("--workers", type=int, help="procesos en paralelo para las réplicas")

    synth = sub.add_parser("synth", help="genera datos sintéticos con embedding plantado")
    _flags_comunes(synth)
    synth.add_argument("--dim", type=int)
    synth.add_argument("--users", type=int)
    synth.add_argument("--items", type=int)
    synth.add_argument("--levels", type=int)
    synth.add_argument("--density", type=float)
    synth.add_argument("--noise-sd", type=float)

    plot = sub.add_parser("plot", help="dibuja un embedding 2D como SVG")
    _flags_comunes(plot)
    plot.add_argument("--labels", help="CSV item,category")
    plot.add_argument("--canvas", type=int, nargs=2, metavar=("ANCHO", "ALTO"))
    plot.add_argument("--point-radius", type=float)

    impute = sub.add_parser("impute", help="completa la matriz por regresión lineal")
    _flags_comunes(impute)
    _flags_datos(impute)

    return parser


def main(argv=None):
    """
    Punto de entrada: arma la configuración (archivo JSON + flags) y ejecuta el
    subcomando.

    Args:
        argv (list, optional): Argumentos; por defecto los de sys.argv.

    Returns:
        int: Código de salida (0 éxito, 1 error, 130 interrumpido).
    """
    args = construir_parser().parse_args(argv)
    configurar_registro(nivel_desde_flags(args.verbose, args.quiet))

    try:
        config = RunConfig.desde_json(args.config) if args.config else RunConfig()
        config = config.con_flags(args)
        return COMANDOS[args.comando](config)
    except KeyboardInterrupt:
        logger.warning("Programa interrumpido por el usuario")
        return 130
    except (ErrorEmbedding, OSError) as e:
        logger.error("Error de configuración: %s", e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
