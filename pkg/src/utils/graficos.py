import logging
import sys
from dataclasses import dataclass

import matplotlib
from matplotlib.figure import Figure

sys.path.append("src")

from model.errores import ErrorGrafico
from utils.visual_effects import VisualEffects

logger = logging.getLogger(__name__)

CATEGORIA_POR_DEFECTO = "sin categoría"
DPI = 100
# Sal fija del hash de ids del SVG: misma entrada, mismo archivo.
SAL_SVG = "embedding-svg"


@dataclass(frozen=True)
class OpcionesGrafico:
    """
    Tamaño del lienzo (píxeles) y radio de los marcadores de item (píxeles).
    """
    ancho: int = 800
    alto: int = 800
    radio: float = 5.0

    def __post_init__(self):
        if self.ancho < 50 or self.alto < 50:
            raise ErrorGrafico("el lienzo debe medir al menos 50 x 50 píxeles")
        if not self.radio > 0:
            raise ErrorGrafico("el radio de los puntos debe ser positivo")


def categorias_items(emb, etiquetas=None):
    """
    Asigna una categoría a cada item del embedding.

    Args:
        emb (Embedding): Embedding a dibujar.
        etiquetas (dict, optional): Identificador original de item -> categoría.

    Returns:
        list: Una categoría por item, en orden de índice.
    """
    if not etiquetas:
        return [CATEGORIA_POR_DEFECTO] * emb.n
    conocidos = set(emb.ids_items)
    desconocidos = sorted(set(etiquetas) - conocidos)
    if desconocidos:
        logger.warning(
            "%d items del archivo de etiquetas no están en el embedding (ej. %s); se ignoran",
            len(desconocidos), desconocidos[0],
        )
    sin_etiqueta = [g for g in emb.ids_items if g not in etiquetas]
    if sin_etiqueta:
        logger.warning("%d items sin etiqueta se dibujan como '%s'", len(sin_etiqueta), CATEGORIA_POR_DEFECTO)
    return [etiquetas.get(g, CATEGORIA_POR_DEFECTO) for g in emb.ids_items]


def construir_figura(emb, etiquetas=None, opciones=None):
    """
    Gráfico de dispersión del embedding 2D: usuarios como puntos grises pequeños e
    items con color y forma según su categoría, una leyenda de categorías y la vista
    ajustada a la caja de los datos con 5% de margen.

    Args:
        emb (Embedding): Embedding con D = 2.
        etiquetas (dict, optional): Categorías de los items.
        opciones (OpcionesGrafico, optional): Tamaño del lienzo y de los puntos.

    Returns:
        matplotlib.figure.Figure: La figura lista para guardar.
    """
    if emb.D != 2:
        raise ErrorGrafico(f"solo se pueden dibujar embeddings 2D (D={emb.D}); vuelva a correr con --dim 2")
    opciones = opciones or OpcionesGrafico()

    fig = Figure(figsize=(opciones.ancho / DPI, opciones.alto / DPI), dpi=DPI)
    ax = fig.add_subplot(1, 1, 1)
    ax.set_aspect("equal", adjustable="box")

    tamano_item = VisualEffects.tamano_marcador(opciones.radio, DPI)
    tamano_usuario = VisualEffects.tamano_marcador(opciones.radio * VisualEffects.FACTOR_RADIO_USUARIO, DPI)

    if emb.m:
        usuarios = ax.scatter(
            emb.usuarios[:, 0], emb.usuarios[:, 1], s=tamano_usuario,
            color=VisualEffects.rgb_a_matplotlib(VisualEffects.COLOR_USUARIO), marker="o", linewidths=0,
        )
        usuarios.set_gid("usuarios")

    categorias = categorias_items(emb, etiquetas)
    # Orden de leyenda: alfabético, con la categoría por defecto al final.
    orden = sorted(set(categorias) - {CATEGORIA_POR_DEFECTO})
    if CATEGORIA_POR_DEFECTO in categorias:
        orden.append(CATEGORIA_POR_DEFECTO)

    for k, categoria in enumerate(orden):
        indices = [j for j, c in enumerate(categorias) if c == categoria]
        color, marcador = VisualEffects.estilo_categoria(k)
        puntos = emb.items[indices]
        coleccion = ax.scatter(
            puntos[:, 0], puntos[:, 1], s=tamano_item, color=color, marker=marcador,
            edgecolors="black", linewidths=0.3, label=categoria,
        )
        coleccion.set_gid(f"items-{k}")

    if orden:
        ax.legend(loc="best", fontsize="small", frameon=True)

    ax.set_xlim(*VisualEffects.limites_con_margen(float(emb.puntos[:, 0].min()), float(emb.puntos[:, 0].max())))
    ax.set_ylim(*VisualEffects.limites_con_margen(float(emb.puntos[:, 1].min()), float(emb.puntos[:, 1].max())))
    ax.set_xticks([])
    ax.set_yticks([])
    fig.subplots_adjust(left=0.02, right=0.98, bottom=0.02, top=0.98)
    return fig


def guardar_svg(fig, path):
    """
    Guarda la figura como SVG autónomo y reproducible (sin fecha y con ids estables).

    Args:
        fig (matplotlib.figure.Figure): Figura a guardar.
        path (str | Path): Archivo de destino.
    """
    with matplotlib.rc_context({"svg.hashsalt": SAL_SVG, "svg.fonttype": "path"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    logger.info("Gráfico guardado en %s", path)
