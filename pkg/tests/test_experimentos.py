from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from conftest import matriz_densa
from ia.muestreador_mcmc import (
    FLUJO_EMBED,
    FLUJO_PARTICION,
    FLUJO_SINTETICO,
    FLUJO_VARIANTE,
    SamplerConfig,
    flujo_aleatorio,
)
from model.errores import ErrorEvaluacion
from model.matriz_ratings import RatingMatrix, RatingScale, distinct_levels
from utils.evaluacion import ideal_tau, score_embedding
from utils.experimentos import (
    SplitSpec,
    configs_por_defecto,
    export_sweep,
    generate_synthetic,
    make_split,
    run_dimension_sweep,
    run_experiment,
    run_size_sweep,
)


def configs_rapidas(variantes=("mcmc", "mcmc-sa", "random")):
    base = SamplerConfig(l_b=20, l_s=20, max_em_iters=2, budget_secs=None, stability_tol=0.0)
    todas = configs_por_defecto(base)
    return {v: todas[v] for v in variantes}


def pares_con_ids(entreno, pares):
    return {(entreno.ids_usuarios[int(i)], entreno.ids_items[int(j)]) for i, j, _ in pares}


class TestMakeSplit:

    def test_cantidad_de_pares_de_prueba(self, rng):
        matriz = matriz_densa(rng.integers(0, 5, (40, 40)) / 4.0)
        entreno, pares = make_split(matriz, SplitSpec(0.25, 0.25), np.random.default_rng(0))
        assert len(pares) == 100
        assert (entreno.m, entreno.n) == (40, 40)
        assert len(entreno) == 1600 - 100

    def test_entrenamiento_y_prueba_disjuntos(self, rng):
        matriz = matriz_densa(rng.integers(0, 5, (20, 16)) / 4.0)
        entreno, pares = make_split(matriz, SplitSpec(0.25, 0.25), np.random.default_rng(3))
        de_entreno = {
            (entreno.ids_usuarios[u], entreno.ids_items[g]) for u, g in zip(entreno.usuarios, entreno.items)
        }
        assert pares_con_ids(entreno, pares).isdisjoint(de_entreno)

    def test_ratings_de_prueba_coinciden_con_la_matriz(self, rng):
        valores = rng.integers(0, 5, (12, 10)) / 4.0
        entreno, pares = make_split(matriz_densa(valores), SplitSpec(0.25, 0.3), np.random.default_rng(1))
        for i, j, r in pares:
            fila = int(entreno.ids_usuarios[int(i)][1:])
            columna = int(entreno.ids_items[int(j)][1:])
            assert r == valores[fila, columna]

    def test_determinista_por_semilla(self, rng):
        matriz = matriz_densa(rng.random((15, 15)))
        a = make_split(matriz, SplitSpec(), np.random.default_rng([7, 2]))
        b = make_split(matriz, SplitSpec(), np.random.default_rng([7, 2]))
        c = make_split(matriz, SplitSpec(), np.random.default_rng([7, 3]))
        assert a[0] == b[0]
        np.testing.assert_array_equal(a[1], b[1])
        assert pares_con_ids(*a) != pares_con_ids(*c)

    def test_train_size_limita_los_puntos(self, rng):
        matriz = matriz_densa(rng.random((40, 40)))
        entreno, pares = make_split(matriz, SplitSpec(0.25, 0.25, train_size=12), np.random.default_rng(0))
        assert entreno.n == 10 + 12
        assert entreno.m == 10 + 12
        assert len(pares) == 100

    def test_train_size_excesivo(self, rng):
        matriz = matriz_densa(rng.random((8, 8)))
        with pytest.raises(ErrorEvaluacion):
            make_split(matriz, SplitSpec(0.25, 0.25, train_size=7), np.random.default_rng(0))

    def test_pocos_pares_de_prueba(self):
        # Cada usuario califica un solo item: la intersección de prueba tiene a lo sumo un rating.
        diagonal = RatingMatrix(range(4), range(4), [1.0, 0.0, 1.0, 0.0], RatingScale(0, 1, 0),
                                ["a", "b", "c", "d"], ["w", "x", "y", "z"])
        with pytest.raises(ErrorEvaluacion):
            make_split(diagonal, SplitSpec(0.25, 0.25), np.random.default_rng(0))

    def test_fracciones_invalidas(self):
        with pytest.raises(ErrorEvaluacion):
            SplitSpec(test_user_fraction=0.0)
        with pytest.raises(ErrorEvaluacion):
            SplitSpec(test_item_fraction=1.0)
        with pytest.raises(ErrorEvaluacion):
            SplitSpec(replicas=0)


class TestGenerateSynthetic:

    def test_niveles_y_escala(self):
        matriz, plantado, func = generate_synthetic(30, 12, 2, 5, 1.0, 0.3, seed=4)
        assert set(distinct_levels(matriz)) <= {0.0, 0.25, 0.5, 0.75, 1.0}
        assert func.K == 5
        assert (plantado.m, plantado.n, plantado.D) == (30, 12, 2)
        assert matriz.ids_usuarios[0] == "u0" and matriz.ids_items[-1] == "g11"

    def test_densidad(self):
        matriz, _, _ = generate_synthetic(50, 20, 2, 3, 0.5, 0.0, seed=8)
        assert 450 <= len(matriz) <= 550

    def test_sin_ruido_el_plantado_alcanza_el_ideal(self):
        matriz, plantado, func = generate_synthetic(20, 10, 2, 5, 1.0, 0.0, seed=2)
        np.testing.assert_array_equal(
            matriz.ratings, func(plantado.distancias(matriz.usuarios, matriz.items))
        )
        pares = np.column_stack([matriz.usuarios, matriz.items, matriz.ratings])
        assert score_embedding(plantado, pares) == pytest.approx(ideal_tau(matriz.ratings), abs=1e-12)

    @pytest.mark.parametrize("densidad", [1.0, 0.3])
    def test_niveles_equiprobables_entre_los_observados(self, densidad):
        matriz, _, _ = generate_synthetic(40, 25, 2, 4, densidad, 0.0, seed=6)
        _, conteos = np.unique(matriz.ratings, return_counts=True)
        assert len(conteos) == 4
        assert conteos.max() - conteos.min() <= 1

    def test_misma_semilla_misma_instancia(self):
        a, _, fa = generate_synthetic(10, 8, 3, 3, 0.7, 0.2, seed=11)
        b, _, fb = generate_synthetic(10, 8, 3, 3, 0.7, 0.2, seed=11)
        assert a == b
        assert fa == fb

    def test_parametros_degenerados(self):
        with pytest.raises(ErrorEvaluacion):
            generate_synthetic(0, 5, 2, 3, 1.0, 0.0, seed=0)
        with pytest.raises(ErrorEvaluacion):
            generate_synthetic(5, 5, 2, 1, 1.0, 0.0, seed=0)
        with pytest.raises(ErrorEvaluacion):
            generate_synthetic(5, 5, 2, 3, 0.0, 0.0, seed=0)
        with pytest.raises(ErrorEvaluacion):
            generate_synthetic(5, 5, 2, 3, 1.0, -0.1, seed=0)


class TestRunExperiment:

    @pytest.fixture
    def instancia(self):
        matriz, _, _ = generate_synthetic(16, 12, 2, 3, 1.0, 0.0, seed=5)
        return matriz

    def test_forma_del_reporte(self, instancia):
        reporte = run_experiment(instancia, SplitSpec(replicas=3, seed=1), configs_rapidas())
        assert reporte.variantes == ["mcmc", "mcmc-sa", "random"]
        assert all(len(reporte.tau[v]) == 3 for v in reporte.variantes)
        assert len(reporte.ideal) == 3
        tabla = reporte.tabla()
        assert list(tabla.columns) == ["variant", "replica", "tau", "ideal_tau"]
        assert len(tabla) == 9

    def test_ideal_es_cota_inferior(self, instancia):
        reporte = run_experiment(instancia, SplitSpec(replicas=3, seed=2), configs_rapidas())
        for variante in reporte.variantes:
            for tau, ideal in zip(reporte.tau[variante], reporte.ideal):
                assert ideal <= tau + 1e-12
                assert -1.0 <= tau <= 1.0

    def test_agregados(self, instancia):
        reporte = run_experiment(instancia, SplitSpec(replicas=4, seed=3), configs_rapidas(("random",)))
        resumen = reporte.resumen()
        valores = np.array(reporte.tau["random"])
        assert resumen["random"]["media"] == pytest.approx(valores.mean())
        assert resumen["random"]["desviacion"] == pytest.approx(valores.std(ddof=1))
        assert resumen["ideal"]["media"] == pytest.approx(np.mean(reporte.ideal))

    def test_replicas_distintas(self, instancia):
        reporte = run_experiment(instancia, SplitSpec(replicas=4, seed=0), configs_rapidas(("random",)))
        assert len(set(reporte.tau["random"])) > 1

    def test_mcmc_reg_corre(self, instancia):
        reporte = run_experiment(instancia, SplitSpec(replicas=1, seed=0), configs_rapidas(("mcmc-reg",)))
        assert -1.0 <= reporte.tau["mcmc-reg"][0] <= 1.0

    def test_paralelo_igual_a_secuencial(self, instancia):
        spec = SplitSpec(replicas=3, seed=9)
        secuencial = run_experiment(instancia, spec, configs_rapidas(), workers=1)
        paralelo = run_experiment(instancia, spec, configs_rapidas(), workers=2)
        assert paralelo.to_dict() == secuencial.to_dict()

    def test_reproducible(self, instancia):
        spec = SplitSpec(replicas=2, seed=4)
        assert run_experiment(instancia, spec, configs_rapidas()).to_dict() == \
            run_experiment(instancia, spec, configs_rapidas()).to_dict()

    def test_guardar(self, instancia, tmp_path):
        reporte = run_experiment(instancia, SplitSpec(replicas=2), configs_rapidas(("random",)))
        reporte.guardar_csv(tmp_path / "eval.csv")
        reporte.guardar_json(tmp_path / "eval.json", extra={"semilla": 0})
        tabla = pd.read_csv(tmp_path / "eval.csv")
        assert list(tabla["variant"]) == ["random", "random"]
        assert '"semilla": 0' in (tmp_path / "eval.json").read_text(encoding="utf-8")


class TestBarridos:

    def test_barrido_de_tamano(self, tmp_path):
        matriz, _, _ = generate_synthetic(24, 24, 2, 3, 1.0, 0.0, seed=1)
        resultados = run_size_sweep(matriz, SplitSpec(replicas=2), configs_rapidas(("random",)), [4, 8])
        assert list(resultados) == [4, 8]
        export_sweep(resultados, "train_size", tmp_path / "sweep.csv")
        tabla = pd.read_csv(tmp_path / "sweep.csv")
        assert list(tabla.columns) == ["axis", "value", "variant", "replica", "tau", "ideal_tau"]
        assert len(tabla) == 4
        assert set(tabla["value"]) == {4, 8}

    def test_barrido_de_dimension(self):
        matriz, _, _ = generate_synthetic(16, 12, 2, 3, 1.0, 0.0, seed=1)
        resultados = run_dimension_sweep(
            matriz, SplitSpec(replicas=1, train_size=3), configs_rapidas(("mcmc",)), [1, 3]
        )
        assert list(resultados) == [1, 3]
        assert all(len(r.tau["mcmc"]) == 1 for r in resultados.values())



class TestFlujosAleatorios:

    def test_misma_semilla_flujos_distintos(self):
        muestras = [
            flujo_aleatorio(0, FLUJO_SINTETICO).normal(size=4),
            flujo_aleatorio(0, FLUJO_EMBED).normal(size=4),
            flujo_aleatorio(0, FLUJO_PARTICION, 0, 0).normal(size=4),
            flujo_aleatorio(0, FLUJO_VARIANTE, 0, 0).normal(size=4),
            np.random.default_rng(0).normal(size=4),
        ]
        for a in range(len(muestras)):
            for b in range(a + 1, len(muestras)):
                assert not np.array_equal(muestras[a], muestras[b])

    def test_reproducible(self):
        a = flujo_aleatorio(5, FLUJO_VARIANTE, 3, 0).random(3)
        b = flujo_aleatorio(5, FLUJO_VARIANTE, 3, 0).random(3)
        np.testing.assert_array_equal(a, b)

    def test_semilla_negativa(self):
        with pytest.raises(ErrorEvaluacion):
            SplitSpec(seed=-1)
        with pytest.raises(ErrorEvaluacion):
            generate_synthetic(4, 4, 2, 2, 1.0, 0.0, seed=-1)

    def test_embedding_aleatorio_no_repite_el_plantado(self):
        # Con semilla 0 en el generador y en el experimento, la réplica 0 del
        # embedding aleatorio debe quedar lejos de la cota ideal.
        matriz, _, _ = generate_synthetic(60, 20, 2, 5, 1.0, 0.0, seed=0)
        reporte = run_experiment(
            matriz, SplitSpec(replicas=3, seed=0), {"random": SamplerConfig(budget_secs=None)}
        )
        for tau, ideal in zip(reporte.tau["random"], reporte.ideal):
            assert tau > ideal + 0.2


@pytest.mark.slow
class TestRecuperacionSintetica:
    """Instancia plantada de 60 usuarios, 20 items, D = 2 y 5 niveles, con 25 réplicas."""

    @staticmethod
    def configs(variantes):
        base = SamplerConfig(budget_secs=20.0)
        todas = configs_por_defecto(base)
        return {v: todas[v] for v in variantes}

    def test_mcmc_sa_recupera_la_estructura(self):
        matriz, _, _ = generate_synthetic(60, 20, 2, 5, 1.0, 0.0, seed=0)
        reporte = run_experiment(matriz, SplitSpec(replicas=25, seed=0), self.configs(("mcmc-sa", "random")),
                                 workers=4)
        buenas = sum(tau <= -0.5 for tau in reporte.tau["mcmc-sa"])
        assert buenas >= 20
        assert abs(reporte.resumen()["random"]["media"]) <= 0.1

    def test_orden_de_las_variantes_con_ruido(self):
        matriz, _, _ = generate_synthetic(60, 20, 2, 5, 1.0, 0.1, seed=0)
        reporte = run_experiment(matriz, SplitSpec(replicas=25, seed=0),
                                 self.configs(("mcmc-sa", "mcmc", "random")), workers=4)
        resumen = reporte.resumen()
        assert resumen["mcmc-sa"]["media"] <= resumen["mcmc"]["media"] <= resumen["random"]["media"]
