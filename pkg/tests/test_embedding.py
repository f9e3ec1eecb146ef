import numpy as np
import pytest

from model.embedding import Embedding, export_embedding, load_embedding, normalize, normalizar_en_sitio
from model.errores import ErrorMuestreo


def distancias_entre_todos(puntos):
    diferencias = puntos[:, None, :] - puntos[None, :, :]
    return np.sqrt(np.sum(diferencias ** 2, axis=2))


class TestEmbedding:

    def test_vistas_de_usuarios_e_items(self):
        emb = Embedding([[0.0, 1.0]], [[2.0, 3.0], [4.0, 5.0]])
        assert (emb.m, emb.n, emb.D) == (1, 2, 2)
        emb.puntos[1] = [9.0, 9.0]
        np.testing.assert_array_equal(emb.items[0], [9.0, 9.0])

    def test_dimensiones_distintas(self):
        with pytest.raises(ErrorMuestreo):
            Embedding(np.zeros((2, 2)), np.zeros((2, 3)))

    def test_coordenadas_no_finitas(self):
        with pytest.raises(ErrorMuestreo):
            Embedding([[np.nan, 0.0]], [[0.0, 0.0]])

    def test_distancias(self):
        emb = Embedding([[0.0, 0.0], [1.0, 1.0]], [[3.0, 4.0]])
        np.testing.assert_allclose(emb.distancias([0, 1], [0, 0]), [5.0, np.sqrt(13.0)])


class TestNormalize:

    def test_dos_puntos(self):
        emb = normalize(Embedding([[0.0, 0.0]], [[2.0, 0.0]]))
        np.testing.assert_allclose(emb.puntos, [[-np.sqrt(2.0), 0.0], [np.sqrt(2.0), 0.0]], atol=1e-12)

    def test_media_cero_y_varianza_uno(self, rng):
        emb = normalize(Embedding(rng.normal(3.0, 5.0, (30, 3)), rng.normal(-1.0, 0.2, (10, 3))))
        np.testing.assert_allclose(emb.puntos.mean(axis=0), 0.0, atol=1e-9)
        assert np.mean(emb.puntos ** 2) == pytest.approx(1.0, abs=1e-9)

    def test_idempotente(self, rng):
        una = normalize(Embedding(rng.normal(size=(8, 2)), rng.normal(size=(5, 2))))
        dos = normalize(una)
        np.testing.assert_allclose(dos.puntos, una.puntos, atol=1e-12)

    def test_preserva_razones_de_distancias(self, rng):
        original = Embedding(rng.normal(size=(6, 2)), rng.normal(size=(4, 2)))
        normalizado = normalize(original)
        antes = distancias_entre_todos(original.puntos)
        despues = distancias_entre_todos(normalizado.puntos)
        fuera_diagonal = ~np.eye(len(antes), dtype=bool)
        razones = despues[fuera_diagonal] / antes[fuera_diagonal]
        np.testing.assert_allclose(razones, razones[0], rtol=1e-12)

    def test_no_modifica_la_entrada(self, rng):
        original = Embedding(rng.normal(size=(3, 2)), rng.normal(size=(3, 2)))
        copia = original.puntos.copy()
        normalize(original)
        np.testing.assert_array_equal(original.puntos, copia)

    def test_puntos_identicos(self):
        with pytest.raises(ErrorMuestreo):
            normalize(Embedding([[1.0, 1.0]], [[1.0, 1.0]]))

    def test_un_solo_punto(self):
        with pytest.raises(ErrorMuestreo):
            normalizar_en_sitio(np.zeros((1, 2)))


class TestArchivoEmbedding:

    def test_ida_y_vuelta(self, tmp_path, rng):
        emb = Embedding(rng.normal(size=(4, 3)), rng.normal(size=(2, 3)), ["a", "b", "c", "d"], ["x", "y"])
        export_embedding(emb, tmp_path / "emb.tsv")
        recargado = load_embedding(tmp_path / "emb.tsv")
        np.testing.assert_array_equal(recargado.puntos, emb.puntos)
        assert recargado.ids_usuarios == emb.ids_usuarios
        assert recargado.ids_items == emb.ids_items

    def test_cabecera(self, tmp_path):
        export_embedding(Embedding([[0.0, 1.0]], [[1.0, 0.0]]), tmp_path / "emb.tsv")
        lineas = (tmp_path / "emb.tsv").read_text(encoding="utf-8").splitlines()
        assert lineas[0].split("\t") == ["kind", "index", "original_id", "x_1", "x_2"]
        assert len(lineas) == 3

    def test_formato_invalido(self, tmp_path):
        (tmp_path / "malo.tsv").write_text("a\tb\n1\t2\n", encoding="utf-8")
        with pytest.raises(ErrorMuestreo):
            load_embedding(tmp_path / "malo.tsv")
