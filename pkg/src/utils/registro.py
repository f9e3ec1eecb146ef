import logging

from rich.console import Console
from rich.logging import RichHandler

FORMATO = "%(message)s"


def configurar_registro(nivel=logging.INFO):
    """
    Instala un RichHandler (a stderr) en el logger raíz. Llamarla de nuevo solo
    cambia el nivel.

    Args:
        nivel (int): Nivel de logging (DEBUG con --verbose, WARNING con --quiet).
    """
    raiz = logging.getLogger()
    raiz.setLevel(nivel)
    if not any(isinstance(h, RichHandler) for h in raiz.handlers):
        manejador = RichHandler(console=Console(stderr=True), show_path=False, rich_tracebacks=False)
        manejador.setFormatter(logging.Formatter(FORMATO, datefmt="[%X]"))
        raiz.addHandler(manejador)
    # Los loggers de matplotlib son muy verbosos en DEBUG.
    logging.getLogger("matplotlib").setLevel(max(nivel, logging.WARNING))


def nivel_desde_flags(verbose=False, quiet=False):
    """DEBUG con --verbose, WARNING con --quiet, INFO en otro caso."""
    if verbose:
        return logging.DEBUG
    if quiet:
        return logging.WARNING
    return logging.INFO
