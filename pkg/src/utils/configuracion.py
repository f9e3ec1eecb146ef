import json
import sys
from dataclasses import asdict, dataclass, field, fields, replace

sys.path.append("src")

from ia.muestreador_mcmc import SamplerConfig
from model.errores import ErrorConfiguracion, ErrorEmbedding
from model.matriz_ratings import RatingScale
from utils.experimentos import VARIANTES, SplitSpec
from utils.graficos import OpcionesGrafico


@dataclass(frozen=True)
class OpcionesSinteticas:
    """
    Parámetros de `synth`: tamaño de la instancia, niveles, densidad y ruido. La
    dimensión y la semilla se toman de la configuración del muestreador.
    """
    users: int = 60
    items: int = 20
    levels: int = 5
    density: float = 1.0
    noise_sd: float = 0.0

    def __post_init__(self):
        if self.users < 1 or self.items < 1:
            raise ErrorConfiguracion("users e items deben ser al menos 1")
        if self.levels < 2:
            raise ErrorConfiguracion("levels debe ser al menos 2")
        if not 0 < self.density <= 1:
            raise ErrorConfiguracion("density debe estar en (0, 1]")
        if self.noise_sd < 0:
            raise ErrorConfiguracion("noise_sd no puede ser negativo")


# Secciones anidadas del archivo JSON y la clase que las valida.
SECCIONES = {
    "sampler": SamplerConfig,
    "split": SplitSpec,
    "plot": OpcionesGrafico,
    "synth": OpcionesSinteticas,
    "scale": RatingScale,
}

# Flag de línea de comandos -> (sección, campo). None como sección = campo de RunConfig.
FLAGS = {
    "input": (None, "input"),
    "output_dir": (None, "output_dir"),
    "mapping": (None, "mapping"),
    "labels": (None, "labels"),
    "workers": (None, "workers"),
    "dims": (None, "dims"),
    "train_sizes": (None, "train_sizes"),
    "variant": (None, "variants"),
    "dim": ("sampler", "D"),
    "budget_secs": ("sampler", "budget_secs"),
    "sigma_r": ("sampler", "sigma_r"),
    "l_b": ("sampler", "l_b"),
    "l_s": ("sampler", "l_s"),
    "epsilon": ("sampler", "epsilon"),
    "max_em_iters": ("sampler", "max_em_iters"),
    "replicas": ("split", "replicas"),
    "train_size": ("split", "train_size"),
    "point_radius": ("plot", "radio"),
    "users": ("synth", "users"),
    "items": ("synth", "items"),
    "levels": ("synth", "levels"),
    "density": ("synth", "density"),
    "noise_sd": ("synth", "noise_sd"),
}


@dataclass(frozen=True)
class RunConfig:
    """
    Configuración completa de una ejecución de línea de comandos: rutas, escala de los
    ratings, variantes y las configuraciones del muestreador, la partición, el gráfico
    y la instancia sintética.
    """
    input: str | None = None
    output_dir: str = "salida"
    mapping: str | None = None
    labels: str | None = None
    scale: RatingScale = field(default_factory=lambda: RatingScale(0.0, 1.0, 0.0))
    variants: tuple = VARIANTES
    workers: int = 1
    dims: tuple = ()
    train_sizes: tuple = ()
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    split: SplitSpec = field(default_factory=SplitSpec)
    plot: OpcionesGrafico = field(default_factory=OpcionesGrafico)
    synth: OpcionesSinteticas = field(default_factory=OpcionesSinteticas)

    def __post_init__(self):
        # Las listas del JSON se guardan como tuplas.
        for nombre in ("variants", "dims", "train_sizes"):
            object.__setattr__(self, nombre, tuple(getattr(self, nombre)))
        if not self.variants:
            raise ErrorConfiguracion("se necesita al menos una variante")
        desconocidas = [v for v in self.variants if v not in VARIANTES]
        if desconocidas:
            raise ErrorConfiguracion(f"variante desconocida: {desconocidas[0]} (opciones: {', '.join(VARIANTES)})")
        if len(set(self.variants)) != len(self.variants):
            raise ErrorConfiguracion("variantes repetidas")
        if self.workers < 1:
            raise ErrorConfiguracion("workers debe ser al menos 1")
        if any(d < 1 for d in self.dims):
            raise ErrorConfiguracion("las dimensiones del barrido deben ser al menos 1")
        if any(t < 1 for t in self.train_sizes):
            raise ErrorConfiguracion("los tamaños del barrido deben ser al menos 1")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def desde_dict(cls, datos):
        """
        Construye la configuración desde un diccionario con las claves de RunConfig y
        secciones anidadas (`sampler`, `split`, `plot`, `synth`, `scale`).

        Raises:
            ErrorConfiguracion: Clave desconocida o valor inválido.
        """
        if not isinstance(datos, dict):
            raise ErrorConfiguracion("la configuración debe ser un objeto JSON")
        _rechazar_desconocidas(cls, datos, "configuración")
        argumentos = dict(datos)
        for seccion, clase in SECCIONES.items():
            if seccion not in argumentos:
                continue
            valor = argumentos[seccion]
            if seccion == "scale" and isinstance(valor, (list, tuple)):
                valor = dict(zip(("min_raw", "max_raw", "step"), valor))
            argumentos[seccion] = _construir(clase, valor, seccion)
        try:
            return cls(**argumentos)
        except TypeError as e:
            raise ErrorConfiguracion(f"configuración inválida: {e}") from e

    @classmethod
    def desde_json(cls, path):
        """
        Lee la configuración desde un archivo JSON. Acepta también el bloque
        `run_config` de un reporte de ejecución, para repetir una corrida.
        """
        try:
            with open(path, encoding="utf-8") as archivo:
                datos = json.load(archivo)
        except json.JSONDecodeError as e:
            raise ErrorConfiguracion(f"JSON inválido en {path}: {e}") from e
        if isinstance(datos, dict) and "run_config" in datos:
            datos = datos["run_config"]
        return cls.desde_dict(datos)

    def con_flags(self, args):
        """
        Aplica los flags de línea de comandos que no son None; los flags ganan sobre
        el archivo de configuración.

        Args:
            args (argparse.Namespace): Flags analizados.

        Returns:
            RunConfig: Nueva configuración.
        """
        cambios = {}
        secciones = {}
        for flag, (seccion, campo) in FLAGS.items():
            valor = getattr(args, flag, None)
            if valor is None:
                continue
            if seccion is None:
                cambios[campo] = valor
            else:
                secciones.setdefault(seccion, {})[campo] = valor

        # La semilla alimenta al muestreador y a la partición.
        seed = getattr(args, "seed", None)
        if seed is not None:
            secciones.setdefault("sampler", {})["seed"] = seed
            secciones.setdefault("split", {})["seed"] = seed
        if getattr(args, "no_anneal", False):
            secciones.setdefault("sampler", {})["anneal"] = False
        canvas = getattr(args, "canvas", None)
        if canvas is not None:
            secciones.setdefault("plot", {}).update(ancho=canvas[0], alto=canvas[1])
        escala = getattr(args, "scale", None)
        if escala is not None:
            cambios["scale"] = _construir(RatingScale, dict(zip(("min_raw", "max_raw", "step"), escala)), "scale")

        for seccion, valores in secciones.items():
            try:
                cambios[seccion] = replace(getattr(self, seccion), **valores)
            except ErrorEmbedding as e:
                raise ErrorConfiguracion(f"{seccion}: {e}") from e
        try:
            return replace(self, **cambios)
        except ErrorConfiguracion:
            raise
        except ErrorEmbedding as e:
            raise ErrorConfiguracion(str(e)) from e


def _rechazar_desconocidas(clase, datos, contexto):
    permitidas = {f.name for f in fields(clase)}
    desconocidas = sorted(set(datos) - permitidas)
    if desconocidas:
        raise ErrorConfiguracion(f"clave desconocida en {contexto}: {desconocidas[0]}")


def _construir(clase, datos, seccion):
    """Instancia una sección anidada validando claves y valores."""
    if isinstance(datos, clase):
        return datos
    if not isinstance(datos, dict):
        raise ErrorConfiguracion(f"la sección {seccion} debe ser un objeto")
    _rechazar_desconocidas(clase, datos, seccion)
    try:
        return clase(**datos)
    except ErrorConfiguracion:
        raise
    except (ErrorEmbedding, TypeError) as e:
        raise ErrorConfiguracion(f"{seccion}: {e}") from e
