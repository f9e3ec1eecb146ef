import numpy as np
import pytest

from model.matriz_ratings import RatingMatrix, RatingScale


def escribir_csv(path, filas, cabecera="user,item,rating"):
    """Escribe un CSV de ratings a partir de tuplas (usuario, item, rating)."""
    lineas = [cabecera] + [",".join(str(c) for c in fila) for fila in filas]
    path.write_text("\n".join(lineas) + "\n", encoding="utf-8")
    return path


def matriz_densa(valores, escala=None):
    """RatingMatrix con todas las celdas de una grilla m x n de valores en [0, 1]."""
    valores = np.asarray(valores, dtype=float)
    m, n = valores.shape
    usuarios, items = np.indices((m, n))
    return RatingMatrix(
        usuarios.reshape(-1), items.reshape(-1), valores.reshape(-1),
        escala or RatingScale(0.0, 1.0, 0.0),
        [f"u{i}" for i in range(m)], [f"g{j}" for j in range(n)],
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def matriz_pequena():
    """3 usuarios, 3 items, 5 ratings en la escala 1-5."""
    escala = RatingScale(1.0, 5.0, 1.0)
    return RatingMatrix(
        [0, 0, 1, 2, 2], [0, 1, 1, 0, 2], [5, 1, 3, 4, 2], escala,
        ["ana", "beto", "carla"], ["go", "ajedrez", "damas"],
    )
