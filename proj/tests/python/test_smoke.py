import json
import math

import numpy as np
import pytest

import sspo


def test_gates():
    cfg = sspo.GateConfig(tau_pos=1.0, tau_neg=2.0)
    assert sspo.sspo_gate(1.0, 1.0, cfg) == 1.0
    assert sspo.sspo_gate(2.0, 1.0, cfg) == pytest.approx(math.exp(math.pi / 4), rel=1e-14)
    assert sspo.clip_gate(1.5, 1.0, cfg) == pytest.approx(1.2)
    assert sspo.soft_gate_derivative(1.0, -1.0, cfg) == pytest.approx(1.0)
    assert sspo.sspo_weight(1.0, 1.0, cfg) == (1.0, 1.0)
    assert sspo.temperature(0.0, cfg) == 2.0
    with pytest.raises(ValueError):
        sspo.GateConfig(tau_pos=3.0, tau_neg=1.0)


def test_group_math():
    adv = sspo.normalize_advantages([1.0, 0.0, 0.0, 0.0])
    assert adv[0] == pytest.approx(math.sqrt(3))
    assert sum(adv) == pytest.approx(0.0, abs=1e-15)
    assert sspo.normalize_advantages([0.5, 0.5]) == [0.0, 0.0]
    assert sspo.sequence_ratio([2.0, 0.5]) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        sspo.normalize_advantages([1.0])


def test_policy_and_evaluate():
    params = sspo.PolicyParams(4, 1, 2)
    assert params.logits.shape == (params.num_states, 4)
    logits = params.logits
    logits[:, 0] = 1.0
    params.logits = logits
    state = sspo.state_index(params, 1, [3])
    assert sspo.log_prob(params, state, 0) == pytest.approx(1.0 - math.log(math.e + 3))
    assert 0.0 <= sspo.entropy(params, state) <= math.log(4)

    traj = sspo.sample_response(params, 0, [2, 1], 3, seed=7)
    again = sspo.sample_response(params, 0, [2, 1], 3, seed=7)
    assert traj.response_tokens == again.response_tokens
    assert traj.length == len(traj.behavior_logps)
    assert sspo.token_ratios(traj, params) == [1.0] * traj.length

    other = sspo.sample_response(params, 0, [2, 1], 3, seed=8)
    group = sspo.TrajectoryGroup([traj, other], [1.0, -1.0])
    grads = []
    for kind in (sspo.ObjectiveKind.GRPO, sspo.ObjectiveKind.GSPO, sspo.ObjectiveKind.GMPO,
                 sspo.ObjectiveKind.SAPO, sspo.ObjectiveKind.SSPO):
        value, grad = sspo.evaluate(kind, [group], params, sspo.GateConfig())
        assert grad.shape == params.logits.shape
        assert np.allclose(grad.sum(axis=1), 0.0, atol=1e-12)
        grads.append(grad)
    for g in grads[1:]:
        assert np.max(np.abs(g - grads[0])) <= 1e-12


def test_tasks():
    spec = sspo.TaskSpec("copy_last", vocab_size=8)
    tokens, bucket = sspo.make_prompt(spec, 7, seed=3)
    assert len(tokens) == 2
    assert bucket == tokens[-1] % 7
    assert sspo.reward(spec, tokens, [tokens[-1], 7]) == 1.0
    assert sspo.reward(spec, tokens, [7]) == 0.0


def test_gradcheck():
    report = sspo.run_gradcheck(sspo.ObjectiveKind.SSPO, seed=0)
    assert report.passed
    assert report.max_rel_err <= 1e-5
    assert not sspo.run_gradcheck(sspo.ObjectiveKind.SSPO, seed=0, rtol=0.0, atol=0.0).passed


def test_train_and_checkpoint(tmp_path):
    cfg = {
        "objective": "sspo",
        "task": {"kind": "copy_last", "vocab_size": 6, "prompt_len": 2, "max_len": 3},
        "train": {"G": 4, "B": 4, "E": 1, "M": 1, "total_updates": 5, "seed": 2},
    }
    rows, params = sspo.train(json.dumps(cfg))
    rows2, params2 = sspo.train(json.dumps(cfg))
    assert len(rows) == 5
    assert rows == rows2
    assert np.array_equal(params.logits, params2.logits)
    assert all(0.0 <= r["mean_reward"] <= 1.0 for r in rows)
    path = str(tmp_path / "p.ckpt")
    params.save(path)
    assert np.array_equal(sspo.PolicyParams.load(path).logits, params.logits)
    cfg["gate"] = {"tau_pos": 1.0}
    with pytest.raises(ValueError, match="gate.tau_neg"):
        sspo.train(json.dumps(cfg))


def test_gates_csv():
    text = sspo.gates_csv(sspo.GateConfig(), 0.5, 2.0, 7)
    lines = text.strip().splitlines()
    assert len(lines) == 8
    assert lines[0].startswith("rho,")
