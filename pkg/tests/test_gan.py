import numpy as np
import pytest
import torch
from hypothesis import given
from hypothesis import strategies as st

from popdyn.crn.network import SimGrid
from popdyn.dataset import Dataset, ScalingBounds
from popdyn.fileformat import ChecksumError, FileFormatError
from popdyn.gan import (
    ConfigMismatchError, Critic, CriticConfig, Generator, GeneratorConfig, TrainConfig, TrainingDiverged,
    critic_forward, critic_input, critic_loss, generator_forward, generator_loss, gradient_penalty,
    load_into, load_params, sample_trajectories, save_params, train, updates_per_epoch,
)


def _constant_dataset(M, H, value, n_obs=1, m_cond=0):
    return Dataset(
        settings=np.full((M, n_obs + m_cond), value, np.float32),
        trajectories=np.full((M, H + 1, n_obs), value, np.float32),
        bounds=ScalingBounds([[0.0, 10.0]] * n_obs, [[0.0, 1.0]] * m_cond),
        model="constant", grid=SimGrid(0, 1, H), N=M, k=1,
        observables=tuple(f"X{i}" for i in range(n_obs)), seed=0,
    )


# -- architecture ---------------------------------------------------------------

def test_generator_output_shape_esirs():
    g = Generator(GeneratorConfig(2, 0, 32), seed=0)
    out = generator_forward(g.eval(), torch.zeros(3, 2), torch.randn(3, 480))
    assert out.shape == (3, 32, 2)


@pytest.mark.parametrize("H,L", [(16, 4), (32, 4), (32, 5)])
def test_deconv_stack_lands_on_H(H, L):
    cfg = GeneratorConfig(1, 0, H, noise_dim=4, embed_channels=4, deconv_filters=(3,) * L)
    out = Generator(cfg, 0).eval()(torch.zeros(2, 1), torch.randn(2, 4))
    assert out.shape == (2, H, 1)


def test_h_must_divide():
    with pytest.raises(ValueError):
        GeneratorConfig(1, 0, 20, deconv_filters=(8, 8, 8))
    with pytest.raises(ValueError):
        GeneratorConfig(0, 0, 16)


def test_generator_deterministic_and_bounded():
    g = Generator(GeneratorConfig(2, 1, 16), seed=1).eval()
    c, z = torch.rand(50, 3) * 2 - 1, torch.randn(50, 480)
    a, b = g(c, z), g(c, z)
    assert torch.equal(a, b)
    assert torch.isfinite(a).all() and a.abs().max() <= 1


def test_seeded_init_is_reproducible():
    cfg = GeneratorConfig(2, 1, 16)
    a, b = Generator(cfg, seed=3), Generator(cfg, seed=3)
    assert all(torch.equal(x, y) for x, y in zip(a.parameters(), b.parameters()))


def test_critic_input_assembly():
    traj = torch.rand(4, 32, 2)
    cond = torch.tensor([[0.1, 0.2, 0.7]] * 4)
    x = critic_input(traj, cond, 2)
    assert x.shape == (4, 3, 33)
    assert torch.equal(x[:, :2, 0], cond[:, :2])
    assert torch.equal(x[:, :2, 1:], traj.transpose(1, 2))
    assert torch.all(x[:, 2, :] == 0.7)


def test_critic_scores_finite_and_shape_checked():
    c = Critic(CriticConfig(2, 1, 32), seed=0)
    s = critic_forward(c, torch.rand(1000, 32, 2) * 2 - 1, torch.rand(1000, 3) * 2 - 1)
    assert s.shape == (1000,) and torch.isfinite(s).all()
    with pytest.raises(ValueError):
        critic_forward(c, torch.rand(4, 16, 2), torch.rand(4, 3))
    with pytest.raises(ValueError):
        critic_forward(c, torch.rand(4, 32, 2), torch.rand(5, 3))


def _zero(module):
    with torch.no_grad():
        for p in module.parameters():
            p.zero_()
    return module


def test_zero_weight_critic_scores_zero():
    c = _zero(Critic(CriticConfig(2, 1, 16), 0))
    assert torch.all(c(torch.rand(5, 16, 2), torch.rand(5, 3)) == 0)


# -- losses -----------------------------------------------------------------------

def _pair(B=6, H=8, n=2):
    g = torch.Generator().manual_seed(0)
    return (torch.randn(B, H, n, generator=g), torch.randn(B, H, n, generator=g),
            torch.zeros(B, 1), torch.rand(B, generator=g))


def test_penalty_linear_unit_critic_is_zero():
    xr, xf, c, e = _pair()
    u = torch.randn(8, 2)
    u /= u.norm()
    assert gradient_penalty(lambda x, _: (x * u).sum((1, 2)), xr, xf, c, e).item() == pytest.approx(0, abs=1e-6)


def test_penalty_constant_critic_is_one():
    xr, xf, c, e = _pair()
    assert gradient_penalty(lambda x, _: torch.zeros(x.shape[0]), xr, xf, c, e).item() == 1.0
    assert gradient_penalty(lambda x, _: 0 * x.sum((1, 2)) + 3.0, xr, xf, c, e).item() == 1.0


def test_penalty_doubled_linear_critic_is_one():
    xr, xf, c, e = _pair()
    u = torch.randn(8, 2)
    u /= u.norm()
    # gradient norm 2 everywhere: (2 - 1)^2
    assert gradient_penalty(lambda x, _: 2 * (x * u).sum((1, 2)), xr, xf, c, e).item() == pytest.approx(1.0)


def test_penalty_ignores_condition_gradient():
    xr, xf, _, e = _pair()
    cond = torch.ones(6, 1, requires_grad=True)
    # the score depends on cond only; the trajectory gradient is zero
    gp = gradient_penalty(lambda x, c: 5 * c.sum(1) + 0 * x.sum((1, 2)), xr, xf, cond, e)
    assert gp.item() == 1.0


def test_penalty_batch_mismatch():
    xr, xf, c, e = _pair()
    with pytest.raises(ValueError):
        gradient_penalty(lambda x, _: x.sum((1, 2)), xr, xf[:3], c, e)


def test_loss_values_for_trivial_critics():
    gen = Generator(GeneratorConfig(1, 0, 16, noise_dim=4, embed_channels=4, deconv_filters=(2, 2)), 0)
    xr = torch.rand(4, 16, 1)
    cond, z, eps = torch.zeros(4, 1), torch.randn(4, 4), torch.rand(4)
    crit = _zero(Critic(CriticConfig(1, 0, 16, conv_filters=(2,)), 0))
    assert critic_loss(crit, gen, xr, cond, z, eps, lam=0.0).item() == 0.0
    assert generator_loss(crit, gen, cond, z).item() == 0.0
    const = lambda x, c: torch.zeros(x.shape[0])  # noqa: E731
    assert critic_loss(const, gen, xr, cond, z, eps, lam=10.0).item() == 10.0


def test_critic_bias_shift_cancels():
    gcfg = GeneratorConfig(1, 1, 16, noise_dim=4, embed_channels=4, deconv_filters=(3, 3))
    ccfg = CriticConfig(1, 1, 16, conv_filters=(3, 3))
    G, C = Generator(gcfg, 0).double(), Critic(ccfg, 1).double()
    g = torch.Generator().manual_seed(2)
    xr = torch.rand(5, 16, 1, generator=g, dtype=torch.float64)
    cond = torch.rand(5, 2, generator=g, dtype=torch.float64)
    z = torch.randn(5, 4, generator=g, dtype=torch.float64)
    eps = torch.rand(5, generator=g, dtype=torch.float64)

    def run():
        torch.manual_seed(9)
        cl = critic_loss(C, G, xr, cond, z, eps, 10.0)
        torch.manual_seed(9)
        G.zero_grad()
        generator_loss(C, G, cond, z).backward()
        return cl.item(), [p.grad.clone() for p in G.parameters()]

    l1, g1 = run()
    with torch.no_grad():
        C.head.bias += 3.5
    l2, g2 = run()
    assert l2 == pytest.approx(l1, abs=1e-12)
    assert all(torch.allclose(a, b, atol=1e-12) for a, b in zip(g1, g2))


# -- finite-difference gradient check ----------------------------------------------

def _fd_check(loss_fn, params, h=1e-6, floor=1e-6):
    """Largest relative error between autograd and central differences."""
    for p in params:
        p.grad = None
    loss_fn().backward()
    worst = 0.0
    for p in params:
        auto = p.grad.detach().clone().reshape(-1)
        flat = p.data.reshape(-1)
        for i in range(flat.numel()):
            old = flat[i].item()
            flat[i] = old + h
            up = loss_fn().item()
            flat[i] = old - h
            down = loss_fn().item()
            flat[i] = old
            num = (up - down) / (2 * h)
            err = abs(num - auto[i].item()) / max(abs(num), abs(auto[i].item()), floor)
            worst = max(worst, err)
    return worst


def _tiny_setup():
    gcfg = GeneratorConfig(1, 1, 16, noise_dim=3, embed_channels=3, deconv_filters=(2, 2))
    ccfg = CriticConfig(1, 1, 16, conv_filters=(2, 2))
    G, C = Generator(gcfg, 4).double().train(), Critic(ccfg, 5).double().train()
    g = torch.Generator().manual_seed(1)
    xr = torch.rand(1, 16, 1, generator=g, dtype=torch.float64) * 2 - 1
    cond = torch.rand(1, 2, generator=g, dtype=torch.float64) * 2 - 1
    z = torch.randn(1, 3, generator=g, dtype=torch.float64)
    eps = torch.rand(1, generator=g, dtype=torch.float64)
    return G, C, xr, cond, z, eps


def test_critic_gradients_match_finite_differences():
    G, C, xr, cond, z, eps = _tiny_setup()

    def loss():
        torch.manual_seed(123)  # same dropout masks every evaluation
        return critic_loss(C, G, xr, cond, z, eps, 10.0)

    assert _fd_check(loss, list(C.parameters())) < 1e-3


def test_generator_gradients_match_finite_differences():
    G, C, xr, cond, z, eps = _tiny_setup()

    def loss():
        torch.manual_seed(321)
        return generator_loss(C, G, cond, z)

    assert _fd_check(loss, list(G.parameters())) < 1e-3


# -- training ----------------------------------------------------------------------

def test_update_count_with_clamped_batch():
    ds = _constant_dataset(10, 16, 3.0)
    gcfg = GeneratorConfig(1, 0, 16, noise_dim=4, embed_channels=4, deconv_filters=(2, 2))
    ccfg = CriticConfig(1, 0, 16, conv_filters=(2,))
    tcfg = TrainConfig(epochs=1, seed=0)
    _, log = train(ds, gcfg, ccfg, tcfg)
    # floor(10 / min(256, 10)) iterations of (5 critic + 1 generator) updates
    assert log.critic_updates + log.generator_updates == 6 == updates_per_epoch(tcfg, 10)
    assert len(log) == 1


def test_train_defaults():
    t = TrainConfig()
    assert (t.lam, t.n_critic, t.m_batch, t.lr, t.betas) == (10.0, 5, 256, 1e-4, (0.5, 0.9))
    with pytest.raises(ValueError):
        TrainConfig(m_batch=1)
    with pytest.raises(ValueError):
        TrainConfig(n_critic=0)
    with pytest.raises(ValueError):
        TrainConfig(lam=-1)


def test_training_is_deterministic():
    ds = _constant_dataset(32, 16, 3.0)
    gcfg = GeneratorConfig(1, 0, 16, noise_dim=4, embed_channels=4, deconv_filters=(4, 4))
    ccfg = CriticConfig(1, 0, 16, conv_filters=(4,))
    tcfg = TrainConfig(epochs=2, m_batch=8, seed=3)
    a, la = train(ds, gcfg, ccfg, tcfg)
    b, lb = train(ds, gcfg, ccfg, tcfg)
    assert la.critic_loss == lb.critic_loss
    assert all(torch.equal(x, y) for x, y in zip(a.state_dict().values(), b.state_dict().values()))


def test_config_mismatch_rejected():
    ds = _constant_dataset(8, 16, 3.0)
    with pytest.raises(ValueError, match="does not match"):
        train(ds, GeneratorConfig(2, 0, 16), CriticConfig(1, 0, 16), TrainConfig(epochs=1))


def test_divergence_guard():
    ds = _constant_dataset(8, 16, 3.0)
    ds.trajectories[:] = np.nan
    gcfg = GeneratorConfig(1, 0, 16, noise_dim=4, embed_channels=4, deconv_filters=(2, 2))
    with pytest.raises(TrainingDiverged):
        train(ds, gcfg, CriticConfig(1, 0, 16, conv_filters=(2,)), TrainConfig(epochs=1, m_batch=4))


def test_degenerate_dataset_converges():
    c = 0.3
    ds = _constant_dataset(64, 16, c)
    gcfg = GeneratorConfig(1, 0, 16, noise_dim=8, embed_channels=16, deconv_filters=(16, 16))
    ccfg = CriticConfig(1, 0, 16, conv_filters=(16, 16))
    G, _ = train(ds, gcfg, ccfg, TrainConfig(m_batch=32, epochs=300, lr=1e-3, seed=1))
    out = sample_trajectories(G, [5.0 * (c + 1)], [], 200, ds.bounds, seed=0)
    scaled = ds.bounds.scale_states(out[:, 1:, :])
    assert np.abs(scaled - c).mean() < 0.05


# -- sampling and persistence ---------------------------------------------------------

@pytest.fixture(scope="module")
def small_gen():
    cfg = GeneratorConfig(2, 1, 16, noise_dim=8, embed_channels=8, deconv_filters=(4, 4))
    return Generator(cfg, seed=2).eval()


BOUNDS = ScalingBounds([[0, 100], [0, 100]], [[0.5, 5]])


def test_sample_row_zero_and_clamp(small_gen):
    out = sample_trajectories(small_gen, [30, 70], [1.0], 1, BOUNDS, seed=0)
    assert out.shape == (1, 17, 2)
    assert np.array_equal(out[0, 0], [30.0, 70.0])
    many = sample_trajectories(small_gen, [0, 0], [1.0], 500, BOUNDS, seed=1)
    assert many.min() >= 0
    rounded = sample_trajectories(small_gen, [30, 70], [1.0], 5, BOUNDS, seed=0, round=True)
    assert np.all(rounded == np.rint(rounded))


def test_sample_needs_bounds(small_gen):
    with pytest.raises(ValueError):
        sample_trajectories(small_gen, [30, 70], [1.0], 1, None, seed=0)
    with pytest.raises(ValueError):
        sample_trajectories(small_gen, [30, 70], [1.0], 0, BOUNDS, seed=0)


@given(st.integers(0, 1000))
def test_sampling_is_a_function_of_seed(small_gen, seed):
    a = sample_trajectories(small_gen, [10, 20], [2.0], 3, BOUNDS, seed=seed)
    b = sample_trajectories(small_gen, [10, 20], [2.0], 3, BOUNDS, seed=seed)
    assert np.array_equal(a, b)


def test_weights_roundtrip(tmp_path, small_gen):
    p = tmp_path / "g.bin"
    save_params(small_gen, p, BOUNDS, {"note": "x"})
    saved = load_params(p)
    assert saved.bounds == BOUNDS and saved.provenance == {"note": "x"}
    assert saved.config == small_gen.config
    for a, b in zip(small_gen.state_dict().values(), saved.module.state_dict().values()):
        assert torch.equal(a.float(), b.float())
    q = tmp_path / "h.bin"
    save_params(saved.module, q, saved.bounds, saved.provenance)
    assert p.read_bytes() == q.read_bytes()


def test_critic_roundtrip(tmp_path):
    c = Critic(CriticConfig(1, 0, 16, conv_filters=(3,)), 0)
    p = tmp_path / "c.bin"
    save_params(c, p)
    loaded = load_params(p).module
    assert isinstance(loaded, Critic)
    assert all(torch.equal(a, b) for a, b in zip(c.state_dict().values(), loaded.state_dict().values()))


def test_corrupt_weights(tmp_path, small_gen):
    p = tmp_path / "g.bin"
    save_params(small_gen, p, BOUNDS)
    data = bytearray(p.read_bytes())
    data[-1] ^= 0x10
    p.write_bytes(bytes(data))
    with pytest.raises(ChecksumError):
        load_params(p)
    p.write_bytes(b"PDABSET1" + bytes(data[8:]))
    with pytest.raises(FileFormatError):
        load_params(p)


def test_load_into_wrong_model(tmp_path, small_gen):
    p = tmp_path / "g.bin"
    save_params(small_gen, p, BOUNDS)
    other = Generator(GeneratorConfig(2, 1, 16, noise_dim=9, embed_channels=8, deconv_filters=(4, 4)))
    with pytest.raises(ConfigMismatchError):
        load_into(other, p)
    with pytest.raises(ConfigMismatchError):
        load_into(Critic(CriticConfig(2, 1, 16)), p)
    same = Generator(small_gen.config)
    load_into(same, p)
    assert torch.equal(same.embed.weight, small_gen.embed.weight)
