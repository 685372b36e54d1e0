"""Acceptance suite: one test per release criterion, desk scale.

Heavy shared artifacts (CA datasets, trained video models, surrogate
comparisons over three master seeds) are built once in a session fixture.
Tolerances are pinned in the asserts; nothing here is statistical beyond
the stated margins.
"""
from __future__ import annotations

import time
import warnings

import numpy as np
import pytest
import torch
from scipy import stats

from firegen.ca import (BURNED, BURNING, UNBURNABLE, UNBURNED, CAParams,
                        burn_probability, initial_state, sample_ignition,
                        simulate, step)
from firegen.geofields import Ecoregion, RasterGrid
from firegen.metrics import (area_vs_covariates, monotonicity_violation_rate,
                             threshold_burned)
from firegen.pipeline import (ExperimentConfig, cmd_evaluate, cmd_generate,
                              cmd_simulate, cmd_train_surrogate,
                              cmd_train_vqvae, evaluate_sequences,
                              surrogate_predictor)
from firegen.pod import PODBasis, flatten_sequences
from firegen.seeding import child_seed
from firegen.sequences import stack_frames
from firegen.surrogate import LSTMSurrogate
from firegen.vqvae import (VQVAE, _VQVAENet, generate_dataset, nearest_codes,
                           straight_through, vq_losses)

GRID = 64
DESK_CA = CAParams(p_h=0.45, steps_per_snapshot=5)
DESK_VQ = dict(epochs=800, batch_size=4)
DESK_SURROGATE = dict(hidden_size=64, batch_size=16, epochs=300, patience=50)
POD_MODES = 32
GEN_ALPHA = 0.6
GEN_COUNTS = (50, 100, 200, 400)
MASTER_SEEDS = (0, 1, 2)
M_IN, HORIZON = 4, 4


def _simulate_split(ms: int, eco: Ecoregion, split: str, n: int):
    out = []
    for i in range(n):
        rng = np.random.default_rng(child_seed(ms, "ignite", split, i))
        ignition = sample_ignition(rng, GRID, GRID, eco.unburnable_mask)
        out.append(simulate(eco, DESK_CA, ignition, 16,
                            seed=child_seed(ms, "simulate", split, i)))
    return out


def _fit_quiet(estimator, X):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        return estimator.fit(X)


def _surrogate_summary(ms: int, tag: str, pool, val, test) -> dict:
    """Train one forecaster on `pool` and score it on the held-out fires."""
    basis = _fit_quiet(PODBasis(n_modes=POD_MODES), flatten_sequences(pool))
    encode = lambda seqs: [basis.encode(s.frames.reshape(s.n_snapshots, -1)
                                        .astype(np.float64)) for s in seqs]
    model = LSTMSurrogate(random_state=child_seed(ms, "sur", tag) % 2**31,
                          **DESK_SURROGATE)
    model.fit(encode(pool), encode(val))
    predict = surrogate_predictor(model, basis, 6.0, HORIZON)
    _, _, summary, _ = evaluate_sequences(predict, test, M_IN, HORIZON)
    return summary


@pytest.fixture(scope="session")
def desk_lab():
    """Per master seed: CA splits, trained generator, surrogate comparison."""
    lab = {}
    for ms in MASTER_SEEDS:
        eco = Ecoregion.synthesize(child_seed(ms, "ecoregion"), GRID, GRID)
        splits = {name: _simulate_split(ms, eco, name, n)
                  for name, n in (("train", 8), ("val", 4), ("test", 8))}
        clips = stack_frames(splits["train"])
        vq = VQVAE(random_state=child_seed(ms, "vqvae") % 2**31,
                   **DESK_VQ).fit(clips)
        gen = generate_dataset(vq, clips, max(GEN_COUNTS), alpha=GEN_ALPHA,
                               master_seed=ms)
        results = {"baseline": _surrogate_summary(
            ms, "baseline", list(splits["train"]), splits["val"],
            splits["test"])}
        for count in GEN_COUNTS:
            pool = list(splits["train"]) + list(gen[:count])
            results[count] = _surrogate_summary(
                ms, f"gen{count}", pool, splits["val"], splits["test"])
        lab[ms] = {"eco": eco, "splits": splits, "vq": vq, "generated": gen,
                   "results": results}
    return lab


# -- criterion 1: CA correctness --------------------------------------------

def test_criterion_01_ca_correctness_suite():
    started = time.perf_counter()
    eco = Ecoregion.synthesize(5, GRID, GRID)
    rng = np.random.default_rng(child_seed(5, "ignite"))
    ignition = sample_ignition(rng, GRID, GRID, eco.unburnable_mask)
    params = CAParams()

    # state-transition legality, burned-set monotonicity, unburnable cells
    state = initial_state(eco, ignition)
    step_rng = np.random.default_rng(child_seed(5, "legality"))
    for _ in range(60):
        nxt = step(state, eco, params, step_rng)
        prev_s, next_s = state.states, nxt.states
        assert np.all(next_s[prev_s == UNBURNABLE] == UNBURNABLE)
        assert np.all(np.isin(next_s[prev_s == UNBURNED],
                              (UNBURNED, BURNING)))
        assert np.all(np.isin(next_s[prev_s == BURNING], (BURNING, BURNED)))
        assert np.all(next_s[prev_s == BURNED] == BURNED)
        burned_prev = np.isin(prev_s, (BURNING, BURNED))
        burned_next = np.isin(next_s, (BURNING, BURNED))
        assert np.all(burned_next[burned_prev])
        assert not np.any(burned_next[eco.unburnable_mask])
        state = nxt
    seq = simulate(eco, params, ignition, 16, seed=child_seed(5, "sim"))
    assert np.isin(seq.frames, (0.0, 1.0)).all()
    assert np.all(np.diff(seq.frames.astype(np.int32), axis=0) >= 0)

    # Monte-Carlo agreement of an isolated donor->receiver ignition
    size = 8
    grid = lambda v, name: RasterGrid(size, size, 30.0,
                                      np.full((size, size), v, np.float32),
                                      name)
    elev = RasterGrid(size, size, 30.0,
                      np.outer(np.ones(size),
                               np.arange(size, dtype=np.float32) * 4.0),
                      "elevation")
    mask = np.ones((size, size), dtype=bool)
    donor, receiver = (4, 4), (4, 5)
    mask[donor] = mask[receiver] = False
    pair_eco = Ecoregion(grid(0.7, "vegetation"), grid(0.55, "canopy"), elev,
                         wind_speed=3.0, wind_direction=0.7,
                         unburnable_mask=mask)
    p = burn_probability(params, pair_eco, donor, receiver)
    assert 0.05 < p < 0.95, "degenerate Monte-Carlo setup"
    trials = 20_000
    mc_rng = np.random.default_rng(child_seed(5, "mc"))
    hits = 0
    base = initial_state(pair_eco, donor)
    for _ in range(trials):
        nxt = step(base, pair_eco, params, mc_rng)
        hits += int(nxt.states[receiver] == BURNING)
    sigma = np.sqrt(trials * p * (1 - p))
    assert abs(hits - trials * p) <= 3 * sigma, \
        f"empirical {hits / trials:.4f} vs analytic {p:.4f}"
    assert time.perf_counter() - started < 60.0


# -- criterion 2: reduced-basis oracle ---------------------------------------

def test_criterion_02_reduced_basis_oracle():
    rng = np.random.default_rng(11)
    for trial in range(5):
        X = rng.random((20, 50))  # 20 snapshots of a 50-dim state
        n = X.shape[0]
        basis = _fit_quiet(PODBasis(n_modes=8), X)
        oracle = np.linalg.eigvalsh((X.T @ X) / (n - 1))[::-1][:n]
        for got, want in zip(basis.eigenvalues_, oracle):
            assert abs(got - want) <= max(1e-8 * abs(want), 1e-12), trial
        lam = np.clip(oracle, 0, None)
        gamma_bf = float((lam[:8] ** 2).sum() / (lam ** 2).sum())
        gamma, rho = basis.compression_stats()
        assert abs(gamma - gamma_bf) <= 1e-10
        assert rho == pytest.approx(8 / 50)
        full = _fit_quiet(PODBasis(n_modes=n), X)
        assert np.abs(full.decode(full.encode(X)) - X).max() <= 1e-5


# -- criterion 3: gradient checks --------------------------------------------

def _fd_matches(analytic: float, fd: float) -> bool:
    return abs(analytic - fd) <= 1e-8 + 1e-4 * max(abs(analytic), abs(fd))


def test_criterion_03_gradient_checks():
    # recurrent forecaster: every parameter group against central differences
    model = LSTMSurrogate(m_in=3, m_out=2, hidden_size=8, num_layers=2,
                          random_state=7)
    model.build(n_latent=3, dtype=torch.float64)
    rng = np.random.default_rng(0)
    window = (rng.standard_normal((3, 3)), rng.standard_normal((2, 3)))
    model.window_loss(window).backward()
    h = 1e-6
    for name, param in model.net_.named_parameters():
        flat, gflat = param.data.view(-1), param.grad.view(-1)
        for i in rng.choice(flat.numel(), size=min(4, flat.numel()),
                            replace=False):
            orig = flat[i].item()
            flat[i] = orig + h
            up = model.window_loss(window).item()
            flat[i] = orig - h
            down = model.window_loss(window).item()
            flat[i] = orig
            assert _fd_matches(gflat[i].item(), (up - down) / (2 * h)), name

    # tiny video autoencoder, per-path checks in 64-bit
    torch.manual_seed(0)
    net = _VQVAENet((4,), (1,), (2,), latent_dim=6, codebook_size=8).double()
    x = torch.rand(2, 1, 4, 8, 8, dtype=torch.float64)

    def losses():
        recon, z, e, _ = net(x)
        return vq_losses(x, recon, z, e, beta=0.25)

    def fd_check(params, which, n_probe=6):
        for p in net.parameters():
            p.grad = None
        losses()[which].backward()
        for param in params:
            flat, grad = param.data.view(-1), param.grad.view(-1)
            for i in np.random.default_rng(3).choice(
                    flat.numel(), size=min(n_probe, flat.numel()),
                    replace=False):
                orig = flat[i].item()
                flat[i] = orig + h
                up = losses()[which].item()
                flat[i] = orig - h
                down = losses()[which].item()
                flat[i] = orig
                assert _fd_matches(grad[i].item(), (up - down) / (2 * h))

    fd_check(net.decoder.parameters(), which=3)   # decoder sees the total
    fd_check(net.encoder.parameters(), which=2)   # encoder's commit path
    fd_check([net.codebook.entries], which=1)     # codebook's own loss

    # zero-gradient contracts of the stop-gradient partition
    for p in net.parameters():
        p.grad = None
    recon, z, e, _ = net(x)
    _, codebook_loss, _, _ = vq_losses(x, recon, z, e, beta=0.25)
    codebook_loss.backward()
    assert all(p.grad is None or p.grad.abs().sum() == 0
               for p in net.encoder.parameters())
    for p in net.parameters():
        p.grad = None
    recon, z, e, _ = net(x)
    recon_loss, _, commit_loss, _ = vq_losses(x, recon, z, e, beta=0.25)
    (recon_loss + commit_loss).backward()
    g = net.codebook.entries.grad
    assert g is None or g.abs().sum() == 0

    # straight-through estimator: pass-through equals the decoder gradient
    z = net.encode(x).detach().requires_grad_(True)
    e, _ = net.codebook.quantize(z.reshape(-1, 6))
    e = e.view(z.shape).detach()
    (net.decode(straight_through(z, e)) - x).pow(2).sum().backward()
    analytic = z.grad.reshape(-1)
    flat_e = e.reshape(-1)
    for i in np.random.default_rng(1).choice(flat_e.numel(), size=12,
                                             replace=False):
        probe = flat_e.clone()
        probe[i] += h
        with torch.no_grad():
            up = (net.decode(probe.view(e.shape)) - x).pow(2).sum().item()
        probe[i] -= 2 * h
        with torch.no_grad():
            down = (net.decode(probe.view(e.shape)) - x).pow(2).sum().item()
        assert _fd_matches(analytic[i].item(), (up - down) / (2 * h))


# -- criterion 4: quantizer oracle -------------------------------------------

def test_criterion_04_quantizer_oracle():
    rng = np.random.default_rng(21)
    for _ in range(1000):
        entries = rng.standard_normal((64, 8))
        z = rng.standard_normal((5, 8))
        _, idx = nearest_codes(entries, z)
        d2 = ((z[:, None, :] - entries[None, :, :]) ** 2).sum(-1)
        assert np.array_equal(idx, d2.argmin(axis=1))
    # deterministic tie-breaking: duplicated entries resolve to the lowest id
    entries = np.zeros((64, 8))
    entries[10] = entries[30] = 1.0
    _, idx = nearest_codes(entries, np.ones((3, 8)))
    assert np.array_equal(idx, [10, 10, 10])


# -- criterion 5: autoencoder desk training ----------------------------------

def test_criterion_05_autoencoder_desk_training():
    small = 32
    eco = Ecoregion.synthesize(child_seed(9, "ecoregion"), small, small)
    clips = []
    for i in range(8):
        rng = np.random.default_rng(child_seed(9, "ignite", i))
        ignition = sample_ignition(rng, small, small, eco.unburnable_mask)
        clips.append(simulate(eco, DESK_CA, ignition, 16,
                              seed=child_seed(9, "sim", i)))
    x = stack_frames(clips)
    assert x.shape == (8, 16, small, small)
    model = VQVAE(epochs=100, batch_size=4,
                  random_state=child_seed(9, "vqvae") % 2**31).fit(x)
    history = model.loss_history_["recon"]
    assert history[-1] * 10 <= history[0], \
        f"recon loss only {history[0] / history[-1]:.1f}x down"
    for clip in x:
        exact = model.generate(clip, alpha=1.0)
        assert np.array_equal(exact, model.reconstruct(clip))
        assert exact.min() >= 0.0 and exact.max() <= 1.0
    noisy = model.generate(x[0], alpha=0.5,
                           rng=np.random.default_rng(0))
    assert noisy.min() >= 0.0 and noisy.max() <= 1.0


# -- criterion 6: generation fidelity trends ---------------------------------

def test_criterion_06_generation_fidelity_trends(desk_lab):
    seed0 = desk_lab[MASTER_SEEDS[0]]
    generated = list(seed0["generated"][:50])
    assert len(generated) >= 50

    curves = np.stack([[threshold_burned(f).sum() for f in g.frames]
                       for g in generated]).astype(float)
    mean_curve = curves.mean(axis=0)
    assert np.all(np.diff(mean_curve) >= 0), \
        f"mean curve dips: {np.diff(mean_curve).min():.2f}"

    rates = [monotonicity_violation_rate(g) for g in generated]
    assert float(np.median(rates)) <= 0.1, f"median {np.median(rates):.3f}"

    ca_set = sum((list(seed0["splits"][k]) for k in ("train", "val", "test")),
                 [])
    final_hours = float(ca_set[0].times_hours()[-1])
    for name, dataset in (("ca", ca_set), ("generated", generated)):
        usable = []
        for seq in dataset:
            try:
                usable.append(area_vs_covariates([seq], seed0["eco"],
                                                 at_hours=final_hours)[0])
            except ValueError:
                continue
        assert len(usable) >= 0.8 * len(dataset), name
        rho = stats.spearmanr([u["final_area"] for u in usable],
                              [u["mean_vegetation"] for u in usable]).statistic
        assert rho > 0, f"{name} area/vegetation spearman {rho:+.3f}"


# -- criterion 7: surrogate comparison over master seeds ---------------------

def test_criterion_07_surrogate_beats_baseline(desk_lab):
    mismatch_wins = ssim_wins = 0
    for ms in MASTER_SEEDS:
        res = desk_lab[ms]["results"]
        base, prop = res["baseline"], res[max(GEN_COUNTS)]
        mismatch_wins += (prop["mean_relative_mismatch"]
                          <= base["mean_relative_mismatch"])
        ssim_wins += prop["mean_ssim"] >= base["mean_ssim"]
    assert mismatch_wins >= 2, f"mismatch wins {mismatch_wins}/3"
    assert ssim_wins >= 2, f"ssim wins {ssim_wins}/3"


# -- criterion 8: generation speedup -----------------------------------------

def test_criterion_08_generation_speedup():
    big = 128
    eco = Ecoregion.synthesize(child_seed(13, "ecoregion"), big, big)
    params = CAParams()  # stock spread regime and steps_per_snapshot
    rng = np.random.default_rng(child_seed(13, "ignite"))
    ignition = sample_ignition(rng, big, big, eco.unburnable_mask)
    source = [simulate(eco, params, ignition, 16, seed=child_seed(13, "sim", i))
              for i in range(2)]
    clips = stack_frames(source)
    # weight quality is irrelevant to generation timing, so fit briefly
    vq = VQVAE(epochs=2, batch_size=2,
               random_state=child_seed(13, "vqvae") % 2**31).fit(clips)

    runs = 10
    t0 = time.perf_counter()
    for i in range(runs):
        simulate(eco, params, ignition, 16, seed=child_seed(13, "bench", i))
    ca_seconds = (time.perf_counter() - t0) / runs
    t0 = time.perf_counter()
    generate_dataset(vq, clips, runs, alpha=GEN_ALPHA, master_seed=13)
    gen_seconds = (time.perf_counter() - t0) / runs
    ratio = ca_seconds / gen_seconds
    assert ratio >= 10.0, (f"generation {gen_seconds:.3f}s vs CA "
                           f"{ca_seconds:.3f}s per sequence: {ratio:.1f}x")


# -- criterion 9: generated-count sweep --------------------------------------

def test_criterion_09_generated_count_sweep(desk_lab):
    best = [min(desk_lab[ms]["results"][count]["mean_relative_mismatch"]
                for ms in MASTER_SEEDS)
            for count in GEN_COUNTS]
    slope = float(np.polyfit(GEN_COUNTS, best, 1)[0])
    assert slope <= 0, f"best mismatch {best} -> slope {slope:+.5f}"


# -- criterion 10: pipeline reproducibility ----------------------------------

def test_criterion_10_pipeline_reproducibility(tmp_path):
    def run(root):
        cfg = ExperimentConfig(
            master_seed=3, grid_size=32, n_train_sims=3, n_val_sims=2,
            n_test_sims=2, n_generated=6, pod_modes=12,
            ca={"p_h": 0.45, "steps_per_snapshot": 5},
            vqvae={"channels": [4, 8], "latent_dim": 8, "codebook_size": 16,
                   "temporal_strides": [1, 2], "spatial_strides": [2, 2],
                   "epochs": 6},
            surrogate={"hidden_size": 16, "num_layers": 1, "epochs": 8,
                       "patience": 8},
            output_dir=str(root))
        cmd_simulate(cfg)
        cmd_train_vqvae(cfg)
        cmd_generate(cfg)
        cmd_train_surrogate(cfg, mode="baseline")
        cmd_train_surrogate(cfg, mode="proposed")
        cmd_evaluate(cfg)
        return root

    first, second = run(tmp_path / "a"), run(tmp_path / "b")
    datasets = sorted(p.relative_to(first) for p in first.rglob("*.fseq"))
    assert datasets, "no datasets written"
    for rel in datasets:
        assert (first / rel).read_bytes() == (second / rel).read_bytes(), rel
    csvs = sorted(p.relative_to(first) for p in first.rglob("*.csv"))
    assert any("evaluation" in str(rel) for rel in csvs)
    for rel in csvs:
        assert (first / rel).read_text() == (second / rel).read_text(), rel
