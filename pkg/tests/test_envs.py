import numpy as np
import pytest
from scipy import stats

from trihop.config import load_config
from trihop.envs import (
    COMPONENT_NAMES,
    FREE_FLOAT_COMPONENTS,
    GIMBAL_COMPONENTS,
    JUMP_COMPONENTS,
    DomainRandomization,
    compute_reward_components,
    make_env,
    randomize_domain,
    sample_command,
    total_reward,
)
from trihop.envs.rewards import collision_body_groups
from trihop.model import build_robot_model
from trihop.rotations import quat_from_axis_angle, random_unit_quaternion, rotation_angle


@pytest.fixture(scope="module")
def cfg():
    return load_config()


@pytest.fixture(scope="module")
def model(cfg):
    return build_robot_model(cfg)


# ----------------------------------------------------------- reward weights


def test_reward_weight_vectors_match_published_values(cfg):
    assert cfg["tasks"]["free_float"]["reward_weights"] == [-1.0, -0.04, -0.15, -3.0]
    assert cfg["tasks"]["gimbal"]["reward_weights"] == [0.15, -0.06, -0.01, -1.0, -4.0e-6, -0.01]
    assert cfg["tasks"]["jump"]["reward_weights"] == [1.5, -0.4, -0.05, -0.4, -15.0, 0.19]


def test_observation_dims(cfg):
    assert make_env("free_float", cfg, 1).obs_dim == 34
    assert make_env("gimbal", cfg, 1).obs_dim == 25
    assert make_env("jump", cfg, 1).obs_dim == 43


def test_gimbal_observation_has_no_joint_velocities(cfg):
    env = make_env("gimbal", cfg, num_envs=1)
    env.reset(seed=0)
    env.state.qd[:] = 123.456  # poison joint velocities
    env.state._version += 1
    obs = env._observe()
    assert not np.any(np.isclose(obs, 123.456))
    assert obs.shape == (1, 25)


# -------------------------------------------------------- reward components


def _random_inputs(rng, n, model):
    return dict(
        q_b=random_unit_quaternion(rng, n),
        q=rng.uniform(model.limits.q_l - 0.3, model.limits.q_u + 0.3, (n, 9)),
        qd=rng.standard_normal((n, 9)),
        qdd=rng.standard_normal((n, 9)),
        tau=rng.standard_normal((n, 9)),
        a_t=rng.uniform(-1, 1, (n, 9)),
        a_prev=rng.uniform(-1, 1, (n, 9)),
        q_l=model.limits.q_l,
        q_u=model.limits.q_u,
        r_b=rng.standard_normal((n, 3)),
        command=rng.standard_normal((n, 3)) + 3.0,
        theta=rng.uniform(-2, 2, n),
        phi=rng.uniform(-2, 2, n),
    )


def test_components_match_straightforward_formulas(cfg, model):
    """Every component against a literal one-env reimplementation."""
    rng = np.random.default_rng(0)
    n = 1000
    inp = _random_inputs(rng, n, model)
    comp = compute_reward_components(**inp)
    for i in range(0, n, 97):
        q_b = inp["q_b"][i]
        w = abs(np.clip(q_b[0], -1, 1))
        angle = 2.0 * np.arccos(w)
        assert abs(comp["orientation_3d"][i] - angle) < 1e-10
        assert abs(comp["orientation_2d"][i] - (7 - abs(inp["theta"][i]) - abs(inp["phi"][i]))) < 1e-10
        assert abs(comp["action_rate"][i] - np.sqrt(((inp["a_t"][i] - inp["a_prev"][i]) ** 2).sum())) < 1e-10
        assert abs(comp["torques"][i] - (inp["tau"][i] ** 2).sum()) < 1e-10
        assert abs(comp["dof_vel"][i] - np.linalg.norm(inp["qd"][i])) < 1e-10
        assert abs(comp["dof_acc"][i] - np.linalg.norm(inp["qdd"][i])) < 1e-10
        assert abs(comp["height"][i] - abs(inp["r_b"][i][2])) < 1e-10
        pos = 1 - np.linalg.norm(inp["r_b"][i] - inp["command"][i]) / np.linalg.norm(inp["command"][i])
        assert abs(comp["pos_cmd"][i] - pos) < 1e-10
        dl = sum(max(0.0, l - x) for l, x in zip(inp["q_l"], inp["q"][i]))
        dl += sum(max(0.0, x - u) for u, x in zip(inp["q_u"], inp["q"][i]))
        assert abs(comp["dof_limits"][i] - dl) < 1e-10


def test_component_edge_cases(cfg, model):
    n = 1
    base = dict(
        q_b=np.array([[1.0, 0, 0, 0]]),
        q=np.zeros((n, 9)), qd=np.zeros((n, 9)), qdd=np.zeros((n, 9)),
        tau=np.zeros((n, 9)), a_t=np.zeros((n, 9)), a_prev=np.zeros((n, 9)),
        q_l=model.limits.q_l, q_u=model.limits.q_u,
        r_b=np.zeros((n, 3)),
    )
    comp = compute_reward_components(**base, theta=np.zeros(1), phi=np.zeros(1))
    assert comp["orientation_3d"][0] == 0.0           # upright
    assert comp["orientation_2d"][0] == 7.0           # theta = phi = 0
    # command handling
    cmd = np.array([[2.0, 0.0, 0.0]])
    at_cmd = compute_reward_components(**{**base, "r_b": cmd.copy()}, command=cmd)
    assert at_cmd["pos_cmd"][0] == pytest.approx(1.0)
    at_origin = compute_reward_components(**base, command=cmd)
    assert at_origin["pos_cmd"][0] == pytest.approx(0.0)
    # two joints 0.1 rad beyond the upper limit
    q = np.zeros((1, 9))
    q[0, 1] = model.limits.q_u[1] + 0.1
    q[0, 5] = model.limits.q_u[5] + 0.1
    over = compute_reward_components(**{**base, "q": q})
    assert over["dof_limits"][0] == pytest.approx(0.2, abs=1e-12)


def test_total_reward_weighted_sums(cfg, model):
    n = 4
    comp = {name: np.zeros(n) for name in COMPONENT_NAMES}
    assert np.allclose(total_reward(comp, [-1, -0.04, -0.15, -3], FREE_FLOAT_COMPONENTS), 0.0)
    comp["orientation_3d"] = np.full(n, np.pi)
    r = total_reward(comp, [-1, -0.04, -0.15, -3], FREE_FLOAT_COMPONENTS)
    assert np.allclose(r, -np.pi)
    comp2 = {name: np.zeros(n) for name in COMPONENT_NAMES}
    comp2["collision"] = np.ones(n)
    r2 = total_reward(comp2, [1.5, -0.4, -0.05, -0.4, -15.0, 0.19], JUMP_COMPONENTS)
    assert np.allclose(r2, -15.0)


def test_total_reward_rejects_mismatched_weights():
    comp = {name: np.zeros(2) for name in COMPONENT_NAMES}
    with pytest.raises(ValueError):
        total_reward(comp, [1.0, 2.0], FREE_FLOAT_COMPONENTS)


def test_pos_cmd_increases_toward_goal(model):
    rng = np.random.default_rng(2)
    cmd = np.array([[4.0, 3.0, 0.2]])
    base = dict(
        q_b=np.array([[1.0, 0, 0, 0]]), q=np.zeros((1, 9)), qd=np.zeros((1, 9)),
        qdd=np.zeros((1, 9)), tau=np.zeros((1, 9)), a_t=np.zeros((1, 9)),
        a_prev=np.zeros((1, 9)), q_l=model.limits.q_l, q_u=model.limits.q_u,
        command=cmd,
    )
    start = rng.standard_normal((1, 3))
    direction = cmd - start
    prev = -np.inf
    for alpha in np.linspace(0, 1, 11):
        comp = compute_reward_components(**base, r_b=start + alpha * direction)
        assert comp["pos_cmd"][0] > prev
        prev = comp["pos_cmd"][0]


# ------------------------------------------------------------------ resets


def test_reset_deterministic(cfg):
    env1 = make_env("free_float", cfg, num_envs=3)
    env2 = make_env("free_float", cfg, num_envs=3)
    o1, o2 = env1.reset(seed=11), env2.reset(seed=11)
    assert np.array_equal(o1, o2)
    assert not np.array_equal(o1, env1.reset(seed=12))


def test_free_float_reset_angle_distribution(cfg):
    env = make_env("free_float", cfg, num_envs=2000, randomize=False)
    env.reset(seed=5)
    angles = rotation_angle(env.state.q_b)
    # uniform-rotation law: cdf (a - sin a) / pi
    res = stats.kstest(angles, lambda a: (a - np.sin(a)) / np.pi)
    assert res.pvalue > 0.01
    assert np.allclose(np.linalg.norm(env.state.v_b, axis=1), 0)
    assert np.allclose(env.state.q, env.default_q)


def test_jump_reset_command_geometry(cfg):
    env = make_env("jump", cfg, num_envs=500, randomize=False)
    env.reset(seed=3)
    delta = env.command - env.start_pos
    assert np.allclose(np.linalg.norm(delta, axis=1), 6.0, atol=1e-12)
    assert np.allclose(delta[:, 2], 0.0, atol=1e-12)


def test_sample_command_radius_and_heading(cfg):
    rng = np.random.default_rng(0)
    origin = np.zeros((10_000, 3))
    cmd = sample_command(rng, origin, 6.0)
    assert np.allclose(np.linalg.norm(cmd, axis=1), 6.0, atol=1e-12)
    heading = np.arctan2(cmd[:, 1], cmd[:, 0])
    counts, _ = np.histogram(heading, bins=16, range=(-np.pi, np.pi))
    res = stats.chisquare(counts)
    assert res.pvalue > 0.01
    cmd2 = sample_command(rng, origin[:100], 2.0)
    assert np.allclose(np.linalg.norm(cmd2, axis=1), 2.0)


def test_gimbal_reset_collision_free(cfg):
    env = make_env("gimbal", cfg, num_envs=64)
    env.reset(seed=7)
    assert not env.world.self_collision(env.state).any()
    rng_lim = np.deg2rad(cfg["tasks"]["gimbal"]["init_angle_range_deg"])
    assert np.all(np.abs(env.state.gimbal_q) <= rng_lim)


# ------------------------------------------------------------ randomization


def test_randomize_domain_zero_width_identity(cfg, model):
    dr = DomainRandomization(
        enabled=True, mass_scale=(1.0, 1.0), com_offset=0.0,
        joint_friction=(0.0, 0.0), gain_scale=(1.0, 1.0))
    rng = np.random.default_rng(0)
    out = randomize_domain(model, dr, rng)
    assert np.allclose(out.masses, model.masses)
    assert np.allclose(out.coms, model.coms)
    assert np.allclose(out.inertias, model.inertias)


def test_randomize_domain_total_mass_bounds(cfg, model):
    dr = DomainRandomization.from_config(cfg)
    rng = np.random.default_rng(1)
    totals = [randomize_domain(model, dr, rng).total_mass for _ in range(200)]
    assert min(totals) >= 5.2 * 0.9 - 1e-9
    assert max(totals) <= 5.2 * 1.1 + 1e-9


def test_randomize_domain_spd(cfg, model):
    dr = DomainRandomization.from_config(cfg)
    rng = np.random.default_rng(2)
    for _ in range(50):
        out = randomize_domain(model, dr, rng)
        assert np.all(np.linalg.eigvalsh(out.inertias) > 0)


# ----------------------------------------------------------------- stepping


def test_zero_action_at_rest_free_float(cfg):
    env = make_env("free_float", cfg, num_envs=1, randomize=False)
    env.reset(seed=0)
    env.world.reset_rows(env.state, np.array([0]))  # upright rest
    obs, rew, done, info = env.step(np.zeros((1, 9)))
    comp = info["components"]
    assert comp["action_rate"][0] == 0.0
    assert comp["torques"][0] < 1e-6
    assert abs(rew[0]) < 1e-4


def test_episode_determinism(cfg):
    def run():
        env = make_env("jump", cfg, num_envs=2)
        obs = env.reset(seed=123)
        rng = np.random.default_rng(9)
        hist = []
        for _ in range(30):
            obs, rew, done, info = env.step(rng.uniform(-1, 1, (2, 9)))
            hist.append(np.concatenate([obs.ravel(), rew]))
        return np.array(hist)

    assert np.array_equal(run(), run())


def test_gimbal_terminates_iff_collision(cfg):
    env = make_env("gimbal", cfg, num_envs=8, randomize=False)
    env.reset(seed=1)
    env.auto_reset = False
    rng = np.random.default_rng(0)
    for _ in range(env.max_steps):
        obs, rew, done, info = env.step(rng.uniform(-1, 1, (8, 9)))
        colliding = env.world.self_collision(env.state)
        timeout = info["time_out"]
        assert np.array_equal(done, colliding | timeout | info["diverged"])
        if done.all():
            break


def test_time_limit_matches_config(cfg):
    env = make_env("free_float", cfg, num_envs=1)
    env.reset(seed=0)
    length = cfg["tasks"]["free_float"]["episode_length_s"]
    expected = int(round(length / env.control_dt))
    steps = 0
    done = np.array([False])
    while not done[0]:
        _, _, done, info = env.step(np.zeros((1, 9)))
        steps += 1
    assert steps == expected
    assert info["time_out"][0]
