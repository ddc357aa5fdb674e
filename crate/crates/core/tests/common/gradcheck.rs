//! Central finite differences against the analytic backward passes, for the
//! network shapes the agents build at the default configuration.

use ndarray::{Array1, Array2, ArrayView2};
use pinch_isac_core::agents::{min_q_action_gradient, AgentConfig, MerlAgent, QNetwork};
use pinch_isac_core::env::SystemConfig;
use pinch_isac_core::nn::{DenseNet, DeterministicPolicy, GaussianPolicy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const RTOL: f64 = 1e-4;
const ATOL: f64 = 1e-7;
const H: f64 = 1e-6;
const PARAMETERIZATIONS: usize = 50;
/// Coordinates probed per parameterization; the output layer is always
/// covered in full.
const PROBES: usize = 400;
const BATCH: usize = 4;
/// Inputs are redrawn until every ReLU pre-activation is at least this far
/// from its kink.
const KINK_MARGIN: f64 = 1e-4;

fn dims() -> (usize, usize, Vec<usize>) {
    let c = SystemConfig::default();
    (c.observation_dim(), c.action_dim(), AgentConfig::default().hidden_sizes)
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

/// Smallest |pre-activation| over all hidden units, recomputed from the raw
/// parameters.
fn min_preactivation(net: &DenseNet, x: ArrayView2<f64>) -> f64 {
    let mut a = x.to_owned();
    let mut least = f64::INFINITY;
    let layers = net.weights().len();
    for (i, (w, b)) in net.weights().iter().zip(net.biases()).enumerate() {
        let z = a.dot(w) + b;
        if i + 1 < layers {
            least = z.iter().fold(least, |m, v| m.min(v.abs()));
            a = z.mapv(|v| v.max(0.0));
        } else {
            a = z;
        }
    }
    least
}

fn probe_indices(rng: &mut ChaCha8Rng, net: &DenseNet) -> Vec<usize> {
    let total = net.param_count();
    let last = net.weights().last().unwrap().len() + net.biases().last().unwrap().len();
    let mut idx: Vec<usize> = (total - last..total).collect();
    idx.extend((0..PROBES).map(|_| rng.random_range(0..total - last)));
    idx
}

/// Checks `analytic` against central differences of `loss` at the probed
/// coordinates of `params`.
fn check(label: &str, params: &[f64], analytic: &[f64], idx: &[usize], mut loss: impl FnMut(&[f64]) -> f64) {
    assert_eq!(params.len(), analytic.len());
    let mut p = params.to_vec();
    for &i in idx {
        let orig = p[i];
        p[i] = orig + H;
        let up = loss(&p);
        p[i] = orig - H;
        let down = loss(&p);
        p[i] = orig;
        let numeric = (up - down) / (2.0 * H);
        let a = analytic[i];
        assert!(
            (a - numeric).abs() <= ATOL + RTOL * a.abs().max(numeric.abs()),
            "{label}: parameter {i}: analytic {a} vs numeric {numeric}"
        );
    }
}

fn weighted_sum(a: &Array2<f64>, c: &Array2<f64>) -> f64 {
    (a * c).sum()
}

pub fn dense_nets_of_every_agent_shape() {
    let (obs, act, hidden) = dims();
    let shapes = [
        // gaussian policy head, deterministic actor, critic
        [vec![obs], hidden.clone(), vec![2 * act]].concat(),
        [vec![obs], hidden.clone(), vec![act]].concat(),
        [vec![obs + act], hidden.clone(), vec![1]].concat(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for sizes in &shapes {
        for k in 0..PARAMETERIZATIONS {
            let net = DenseNet::new(sizes, &mut rng);
            let x = loop {
                let x = gaussian(&mut rng, BATCH, sizes[0]);
                if min_preactivation(&net, x.view()) > KINK_MARGIN {
                    break x;
                }
            };
            let c = gaussian(&mut rng, BATCH, *sizes.last().unwrap());
            let (_, cache) = net.forward(x.view()).unwrap();
            let (grads, _) = net.backward(&cache, c.view()).unwrap();
            let idx = probe_indices(&mut rng, &net);
            let mut probe = net.clone();
            check(&format!("dense {sizes:?} #{k}"), &net.flat_params(), &grads.flatten(), &idx, |p| {
                probe.set_flat_params(p).unwrap();
                weighted_sum(&probe.predict(x.view()).unwrap(), &c)
            });
        }
    }
}

pub fn input_gradient_of_dense_net() {
    let (obs, act, hidden) = dims();
    let sizes = [vec![obs + act], hidden, vec![1]].concat();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for k in 0..PARAMETERIZATIONS {
        let net = DenseNet::new(&sizes, &mut rng);
        let x = loop {
            let x = gaussian(&mut rng, BATCH, sizes[0]);
            if min_preactivation(&net, x.view()) > KINK_MARGIN {
                break x;
            }
        };
        let c = gaussian(&mut rng, BATCH, 1);
        let (_, cache) = net.forward(x.view()).unwrap();
        let (_, gx) = net.backward(&cache, c.view()).unwrap();
        let gx_only = net.backward_input(&cache, c.view()).unwrap();
        assert_eq!(gx, gx_only);
        let flat_x: Vec<f64> = x.iter().copied().collect();
        let all: Vec<usize> = (0..flat_x.len()).collect();
        check(&format!("input #{k}"), &flat_x, &gx.iter().copied().collect::<Vec<_>>(), &all, |p| {
            let xi = ArrayView2::from_shape(x.raw_dim(), p).unwrap();
            weighted_sum(&net.predict(xi).unwrap(), &c)
        });
    }
}

pub fn squashed_gaussian_policy() {
    let (obs, act, hidden) = dims();
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for k in 0..PARAMETERIZATIONS {
        let policy = GaussianPolicy::new(obs, act, &hidden, &mut rng);
        let x = loop {
            let x = gaussian(&mut rng, BATCH, obs);
            if min_preactivation(&policy.net, x.view()) > KINK_MARGIN {
                break x;
            }
        };
        let noise = gaussian(&mut rng, BATCH, act);
        let ga = gaussian(&mut rng, BATCH, act);
        let glp = Array1::from_shape_simple_fn(BATCH, || rng.sample::<f64, _>(StandardNormal));
        let sample = policy.sample(x.view(), noise.view()).unwrap();
        let grads = policy.backward(&sample, ga.view(), glp.view()).unwrap();
        let idx = probe_indices(&mut rng, &policy.net);
        let mut probe = policy.clone();
        check(&format!("gaussian #{k}"), &policy.net.flat_params(), &grads.flatten(), &idx, |p| {
            probe.net.set_flat_params(p).unwrap();
            let s = probe.sample(x.view(), noise.view()).unwrap();
            weighted_sum(&s.actions, &ga) + (&s.log_probs * &glp).sum()
        });
    }
}

pub fn deterministic_actor_through_tanh() {
    let (obs, act, hidden) = dims();
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    for k in 0..PARAMETERIZATIONS {
        let actor = DeterministicPolicy::new(obs, act, &hidden, &mut rng);
        let x = loop {
            let x = gaussian(&mut rng, BATCH, obs);
            if min_preactivation(&actor.net, x.view()) > KINK_MARGIN {
                break x;
            }
        };
        let c = gaussian(&mut rng, BATCH, act);
        let (a, cache) = actor.forward(x.view()).unwrap();
        let grads = actor.backward(&a, &cache, c.view()).unwrap();
        let idx = probe_indices(&mut rng, &actor.net);
        let mut probe = actor.clone();
        check(&format!("actor #{k}"), &actor.net.flat_params(), &grads.flatten(), &idx, |p| {
            probe.net.set_flat_params(p).unwrap();
            weighted_sum(&probe.act(x.view()).unwrap(), &c)
        });
    }
}

pub fn critic_regression_loss() {
    let (obs, act, hidden) = dims();
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    for k in 0..PARAMETERIZATIONS {
        let critic = QNetwork::new(obs, act, &hidden, 1e-3, &mut rng);
        let (s, a) = loop {
            let s = gaussian(&mut rng, BATCH, obs);
            let a = gaussian(&mut rng, BATCH, act).mapv(f64::tanh);
            let input = ndarray::concatenate![ndarray::Axis(1), s, a];
            if min_preactivation(&critic.online, input.view()) > KINK_MARGIN {
                break (s, a);
            }
        };
        let y = Array1::from_shape_simple_fn(BATCH, || rng.sample::<f64, _>(StandardNormal));
        let input = ndarray::concatenate![ndarray::Axis(1), s, a];
        let (out, cache) = critic.online.forward(input.view()).unwrap();
        let b = BATCH as f64;
        let grad_out = (&out.column(0) - &y).mapv(|r| 2.0 * r / b).insert_axis(ndarray::Axis(1));
        let (grads, _) = critic.online.backward(&cache, grad_out.view()).unwrap();
        let idx = probe_indices(&mut rng, &critic.online);
        let mut probe = critic.clone();
        check(&format!("critic #{k}"), &critic.online.flat_params(), &grads.flatten(), &idx, |p| {
            probe.online.set_flat_params(p).unwrap();
            let q = probe.q(s.view(), a.view()).unwrap();
            (&q - &y).mapv(|r| r * r).sum() / b
        });
    }
}

pub fn min_twin_action_gradient() {
    let (obs, act, hidden) = dims();
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let mut done = 0;
    while done < PARAMETERIZATIONS {
        let critics = [
            QNetwork::new(obs, act, &hidden, 1e-3, &mut rng),
            QNetwork::new(obs, act, &hidden, 1e-3, &mut rng),
        ];
        let s = gaussian(&mut rng, BATCH, obs);
        let a = gaussian(&mut rng, BATCH, act).mapv(f64::tanh);
        let input = ndarray::concatenate![ndarray::Axis(1), s, a];
        let q1 = critics[0].q(s.view(), a.view()).unwrap();
        let q2 = critics[1].q(s.view(), a.view()).unwrap();
        if critics.iter().any(|c| min_preactivation(&c.online, input.view()) <= KINK_MARGIN)
            || (&q1 - &q2).iter().any(|d| d.abs() < 1e-6)
        {
            continue;
        }
        let scale = -0.25;
        let (min_q, ga) = min_q_action_gradient(&critics, s.view(), a.view(), scale).unwrap();
        for i in 0..BATCH {
            assert_eq!(min_q[i], q1[i].min(q2[i]));
        }
        let flat: Vec<f64> = a.iter().copied().collect();
        let all: Vec<usize> = (0..flat.len()).collect();
        check(&format!("min-Q #{done}"), &flat, &ga.iter().copied().collect::<Vec<_>>(), &all, |p| {
            let ai = ArrayView2::from_shape(a.raw_dim(), p).unwrap();
            let q1 = critics[0].q(s.view(), ai).unwrap();
            let q2 = critics[1].q(s.view(), ai).unwrap();
            scale * q1.iter().zip(&q2).map(|(x, y)| x.min(*y)).sum::<f64>()
        });
        done += 1;
    }
}

pub fn merl_policy_objective() {
    let (obs, act, _) = dims();
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let mut done = 0;
    let mut seed = 0;
    while done < PARAMETERIZATIONS {
        seed += 1;
        let mut agent = MerlAgent::new(obs, act, AgentConfig { output_init_bound: 0.0, ..Default::default() }, seed);
        agent.set_log_temperature(rng.random_range(-3.0..0.5));
        let s = gaussian(&mut rng, BATCH, obs);
        let noise = gaussian(&mut rng, BATCH, act);
        let sample = agent.policy.sample(s.view(), noise.view()).unwrap();
        let input = ndarray::concatenate![ndarray::Axis(1), s, sample.actions];
        let q1 = agent.critics[0].q(s.view(), sample.actions.view()).unwrap();
        let q2 = agent.critics[1].q(s.view(), sample.actions.view()).unwrap();
        if min_preactivation(&agent.policy.net, s.view()) <= KINK_MARGIN
            || agent.critics.iter().any(|c| min_preactivation(&c.online, input.view()) <= KINK_MARGIN)
            || (&q1 - &q2).iter().any(|d| d.abs() < 1e-6)
        {
            continue;
        }
        let (loss, _, _, grads) = agent.policy_objective_gradient(s.view(), noise.view()).unwrap();
        let params = agent.policy.net.flat_params();
        let idx = probe_indices(&mut rng, &agent.policy.net);
        let mut probe = agent.clone();
        let mut eval = |p: &[f64]| {
            probe.policy.net.set_flat_params(p).unwrap();
            probe.policy_objective_gradient(s.view(), noise.view()).unwrap().0
        };
        assert_eq!(eval(&params), loss);
        check(&format!("merl policy #{done}"), &params, &grads.flatten(), &idx, eval);
        done += 1;
    }
}

pub fn merl_temperature_gradient() {
    let (obs, act, hidden) = dims();
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    for k in 0..PARAMETERIZATIONS {
        let mut agent = MerlAgent::new(obs, act, AgentConfig { hidden_sizes: hidden.clone(), ..Default::default() }, k as u64);
        let log_rho = rng.random_range(-5.0..1.0);
        let log_probs = Array1::from_shape_simple_fn(16, || rng.random_range(-20.0..5.0));
        agent.set_log_temperature(log_rho);
        let analytic = agent.temperature_gradient(&log_probs);
        let h_bar = agent.target_entropy();
        let objective = |lr: f64| -(lr.exp()) * (log_probs.mean().unwrap() + h_bar);
        check(&format!("temperature #{k}"), &[log_rho], &[analytic], &[0], |p| objective(p[0]));
    }
}
