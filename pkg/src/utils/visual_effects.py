class VisualEffects:
    """
    Clase de utilidad estática (no necesita ser instanciada) con el estilo fijo de los
    gráficos de embeddings: paleta de categorías, formas de marcador y color de los
    usuarios. El estilo no es configurable para que los SVG sean reproducibles.
    """

    # Paleta de categorías en RGB (tab10 de matplotlib, en el mismo orden).
    PALETA = [
        (31, 119, 180),
        (255, 127, 14),
        (44, 160, 44),
        (214, 39, 40),
        (148, 103, 189),
        (140, 86, 75),
        (227, 119, 194),
        (188, 189, 34),
        (23, 190, 207),
        (127, 127, 127),
    ]
    # Formas de marcador de matplotlib; se combinan con la paleta.
    MARCADORES = ["o", "s", "^", "D", "v", "P", "X", "*", "h", "<", ">", "p"]
    COLOR_USUARIO = (160, 160, 160)
    # Radio de los usuarios relativo al de los items.
    FACTOR_RADIO_USUARIO = 0.5

    @staticmethod
    def rgb_a_matplotlib(color):
        """
        Convierte un color RGB 0-255 al formato 0-1 de matplotlib.

        Args:
            color (tuple): Color RGB (ej. (31, 119, 180)).

        Returns:
            tuple: Color con componentes en [0, 1].
        """
        return tuple(min(255, max(0, c)) / 255.0 for c in color)

    @staticmethod
    def estilo_categoria(k):
        """
        Color y marcador de la k-ésima categoría (en orden de leyenda). Los colores
        rotan cada 10 categorías y los marcadores cada 12, así las combinaciones no
        se repiten antes de la categoría 60.

        Args:
            k (int): Posición de la categoría.

        Returns:
            tuple: (color matplotlib, marcador).
        """
        color = VisualEffects.PALETA[k % len(VisualEffects.PALETA)]
        marcador = VisualEffects.MARCADORES[k % len(VisualEffects.MARCADORES)]
        return VisualEffects.rgb_a_matplotlib(color), marcador

    @staticmethod
    def tamano_marcador(radio_px, dpi):
        """
        Área de marcador de `scatter` (puntos^2) para un radio en píxeles.

        Args:
            radio_px (float): Radio deseado en píxeles del lienzo.
            dpi (float): Resolución de la figura.

        Returns:
            float: Valor para el argumento `s` de scatter.
        """
        diametro_pt = 2.0 * radio_px * 72.0 / dpi
        return diametro_pt * diametro_pt

    @staticmethod
    def limites_con_margen(minimo, maximo, margen=0.05):
        """
        Intervalo del eje que contiene [minimo, maximo] con un margen relativo a cada lado.
        Un rango degenerado usa un ancho unitario.

        Returns:
            tuple: (inferior, superior).
        """
        ancho = maximo - minimo
        if ancho <= 0:
            ancho = 1.0
        return minimo - margen * ancho, maximo + margen * ancho
