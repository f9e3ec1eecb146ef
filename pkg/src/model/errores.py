class ErrorEmbedding(ValueError):
    """
    Error base de la librería. Todos los errores propios derivan de esta clase,
    de modo que la línea de comandos puede capturarlos con un único `except`.
    """


class ErrorDatosRatings(ErrorEmbedding):
    """
    Error en la lectura o validación de un archivo de ratings.

    Args:
        mensaje (str): Descripción del problema.
        fila (int, optional): Número de línea del archivo donde se detectó (1 = cabecera).
    """
    def __init__(self, mensaje, fila=None):
        self.fila = fila
        if fila is not None:
            mensaje = f"fila {fila}: {mensaje}"
        super().__init__(mensaje)


class ErrorFuncionRating(ErrorEmbedding):
    """Parámetros inválidos para la función de rating escalonada."""


class ErrorMuestreo(ErrorEmbedding):
    """Configuración inválida o estado numérico no finito durante el muestreo."""


class ErrorImputacion(ErrorEmbedding):
    """Problemas al completar la matriz de ratings por regresión."""


class ErrorEvaluacion(ErrorEmbedding):
    """Errores en Kendall's tau, particiones de prueba o datos sintéticos."""


class ErrorConfiguracion(ErrorEmbedding):
    """Configuración de ejecución inválida (archivo JSON o flags)."""


class ErrorGrafico(ErrorEmbedding):
    """El embedding no puede dibujarse (por ejemplo, dimensión distinta de 2)."""
