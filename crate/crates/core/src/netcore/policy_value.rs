//! Policy/value network topologies: shared torso (PPO), separated actor and
//! critic (MAPPO), and the RND variant with predictor, frozen target and an
//! intrinsic value head.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{Activation, Mlp, MlpTrace};
use super::NetError;
use crate::scalar::Scalar;

/// Shape description from which a [`PolicyValueNet`] is built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetSpec {
    pub obs_dim: usize,
    pub actions: usize,
    /// Hidden widths of the three torso layers.
    pub torso: [usize; 3],
    /// Hidden widths of the first two layers of every head.
    pub head: [usize; 2],
    /// Global observation width for a separated critic (MAPPO).
    pub critic_obs_dim: Option<usize>,
    pub rnd: Option<RndSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RndSpec {
    pub hidden: usize,
    pub embedding: usize,
}

impl NetSpec {
    pub fn desk(obs_dim: usize, actions: usize) -> Self {
        Self {
            obs_dim,
            actions,
            torso: [128, 128, 128],
            head: [64, 64],
            critic_obs_dim: None,
            rnd: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RndNets<T> {
    pub intrinsic_value_head: Mlp<T>,
    pub predictor: Mlp<T>,
    /// Frozen after initialization.
    pub target: Mlp<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyValueNet<T> {
    /// Shared torso, or the actor torso when `value_torso` is present.
    pub torso: Mlp<T>,
    pub policy_head: Mlp<T>,
    /// Separate critic torso on the global observation (MAPPO).
    pub value_torso: Option<Mlp<T>>,
    pub value_head: Mlp<T>,
    pub rnd: Option<RndNets<T>>,
}

#[derive(Clone, Debug)]
pub struct ForwardTrace<T> {
    torso: MlpTrace<T>,
    policy: MlpTrace<T>,
    value_torso: Option<MlpTrace<T>>,
    value: MlpTrace<T>,
    intrinsic: Option<MlpTrace<T>>,
}

#[derive(Clone, Debug)]
pub struct ForwardOutput<T> {
    pub logits: Vec<T>,
    pub value: T,
    pub intrinsic_value: Option<T>,
    pub trace: ForwardTrace<T>,
}

/// Upstream gradients for each head output.
#[derive(Clone, Debug)]
pub struct HeadGradients<T> {
    pub logits: Vec<T>,
    pub value: T,
    pub intrinsic_value: T,
}

/// Gradient buffer laid out like [`PolicyValueNet::trainable_slices`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    pub flat: Vec<T>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(net: &PolicyValueNet<T>) -> Self {
        Self {
            flat: vec![T::zero(); net.trainable_count()],
        }
    }

    pub fn norm(&self) -> T {
        self.flat.iter().map(|&g| g * g).sum::<T>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.flat.iter().all(|g| g.is_finite())
    }

    pub fn scale(&mut self, s: T) {
        self.flat.iter_mut().for_each(|g| *g *= s);
    }
}

/// Offsets of each trainable block inside a [`Gradients`] buffer.
struct Layout {
    torso: usize,
    policy: usize,
    value_torso: Option<usize>,
    value: usize,
    intrinsic: Option<usize>,
    predictor: Option<usize>,
}

impl<T: Scalar> PolicyValueNet<T> {
    pub fn new<R: Rng + ?Sized>(spec: &NetSpec, rng: &mut R) -> Result<Self, NetError> {
        if spec.obs_dim == 0 || spec.actions == 0 {
            return Err(NetError::Config("observation and action sizes must be positive".into()));
        }
        let [t1, t2, t3] = spec.torso;
        let [h1, h2] = spec.head;
        let torso = Mlp::new(&[spec.obs_dim, t1, t2, t3], Activation::LeakyRelu, std::f64::consts::SQRT_2, rng);
        let policy_head = Mlp::new(&[t3, h1, h2, spec.actions], Activation::SoftmaxHead, 0.01, rng);
        let value_torso = spec
            .critic_obs_dim
            .map(|d| Mlp::new(&[d, t1, t2, t3], Activation::LeakyRelu, std::f64::consts::SQRT_2, rng));
        let value_head = Mlp::new(&[t3, h1, h2, 1], Activation::Linear, 1.0, rng);
        let rnd = spec.rnd.as_ref().map(|r| RndNets {
            intrinsic_value_head: Mlp::new(&[t3, h1, h2, 1], Activation::Linear, 1.0, rng),
            predictor: Mlp::new(&[spec.obs_dim, r.hidden, r.hidden, r.embedding], Activation::Linear, 1.0, rng),
            target: Mlp::new(&[spec.obs_dim, r.hidden, r.hidden, r.embedding], Activation::Linear, 1.0, rng),
        });
        let net = Self {
            torso,
            policy_head,
            value_torso,
            value_head,
            rnd,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn obs_dim(&self) -> usize {
        self.torso.input_dim()
    }

    pub fn critic_obs_dim(&self) -> Option<usize> {
        self.value_torso.as_ref().map(Mlp::input_dim)
    }

    pub fn actions(&self) -> usize {
        self.policy_head.output_dim()
    }

    pub fn validate(&self) -> Result<(), NetError> {
        for m in self.all_blocks() {
            m.validate()?;
        }
        let t_out = self.torso.output_dim();
        if self.policy_head.input_dim() != t_out {
            return Err(NetError::Config("policy head does not chain onto the torso".into()));
        }
        let critic_out = self.value_torso.as_ref().map_or(t_out, Mlp::output_dim);
        if self.value_head.input_dim() != critic_out || self.value_head.output_dim() != 1 {
            return Err(NetError::Config("value head must map the critic features to one scalar".into()));
        }
        if let Some(r) = &self.rnd {
            if r.intrinsic_value_head.input_dim() != t_out || r.intrinsic_value_head.output_dim() != 1 {
                return Err(NetError::Config("intrinsic value head must output one scalar".into()));
            }
            if r.predictor.output_dim() != r.target.output_dim()
                || r.predictor.input_dim() != self.obs_dim()
                || r.target.input_dim() != self.obs_dim()
            {
                return Err(NetError::Config("predictor and target must share shapes".into()));
            }
        }
        Ok(())
    }

    /// Every block including the frozen target, in checkpoint order.
    pub fn all_blocks(&self) -> Vec<&Mlp<T>> {
        let mut v = vec![&self.torso, &self.policy_head];
        v.extend(self.value_torso.iter());
        v.push(&self.value_head);
        if let Some(r) = &self.rnd {
            v.extend([&r.intrinsic_value_head, &r.predictor, &r.target]);
        }
        v
    }

    pub fn all_blocks_mut(&mut self) -> Vec<&mut Mlp<T>> {
        let mut v = vec![&mut self.torso, &mut self.policy_head];
        v.extend(self.value_torso.iter_mut());
        v.push(&mut self.value_head);
        if let Some(r) = &mut self.rnd {
            v.extend([&mut r.intrinsic_value_head, &mut r.predictor, &mut r.target]);
        }
        v
    }

    fn trainable_blocks(&self) -> Vec<&Mlp<T>> {
        let mut v = vec![&self.torso, &self.policy_head];
        v.extend(self.value_torso.iter());
        v.push(&self.value_head);
        if let Some(r) = &self.rnd {
            v.extend([&r.intrinsic_value_head, &r.predictor]);
        }
        v
    }

    /// Parameter slices updated by the optimizer; the RND target is excluded.
    pub fn trainable_slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut v = Vec::new();
        v.extend(self.torso.slices_mut());
        v.extend(self.policy_head.slices_mut());
        if let Some(vt) = &mut self.value_torso {
            v.extend(vt.slices_mut());
        }
        v.extend(self.value_head.slices_mut());
        if let Some(r) = &mut self.rnd {
            v.extend(r.intrinsic_value_head.slices_mut());
            v.extend(r.predictor.slices_mut());
        }
        v
    }

    pub fn trainable_slices(&self) -> Vec<&[T]> {
        self.trainable_blocks().into_iter().flat_map(Mlp::slices).collect()
    }

    pub fn trainable_count(&self) -> usize {
        self.trainable_blocks().iter().map(|m| m.param_count()).sum()
    }

    fn layout(&self) -> Layout {
        let mut off = 0;
        let mut take = |n: usize| {
            let o = off;
            off += n;
            o
        };
        let torso = take(self.torso.param_count());
        let policy = take(self.policy_head.param_count());
        let value_torso = self.value_torso.as_ref().map(|m| take(m.param_count()));
        let value = take(self.value_head.param_count());
        let (intrinsic, predictor) = match &self.rnd {
            Some(r) => (
                Some(take(r.intrinsic_value_head.param_count())),
                Some(take(r.predictor.param_count())),
            ),
            None => (None, None),
        };
        Layout {
            torso,
            policy,
            value_torso,
            value,
            intrinsic,
            predictor,
        }
    }

    /// Smallest |pre-activation| over the leaky-ReLU units of a trace; used to
    /// keep finite-difference probes away from the kink.
    pub fn kink_margin(&self, trace: &ForwardTrace<T>) -> T {
        let mut pairs = vec![(&self.torso, &trace.torso), (&self.policy_head, &trace.policy), (&self.value_head, &trace.value)];
        if let (Some(m), Some(t)) = (&self.value_torso, &trace.value_torso) {
            pairs.push((m, t));
        }
        if let (Some(r), Some(t)) = (&self.rnd, &trace.intrinsic) {
            pairs.push((&r.intrinsic_value_head, t));
        }
        let mut margin = T::infinity();
        for (m, t) in pairs {
            for (l, z) in m.layers.iter().zip(&t.pre) {
                if l.activation == Activation::LeakyRelu {
                    for &v in z {
                        margin = margin.min(v.abs());
                    }
                }
            }
        }
        margin
    }

    /// Logits only.
    pub fn policy_logits(&self, obs: &[T]) -> Result<Vec<T>, NetError> {
        let feats = self.torso.eval(obs)?;
        self.policy_head.eval(&feats)
    }

    /// Full pass. `critic_obs` is required when the critic is separated.
    pub fn forward(&self, obs: &[T], critic_obs: Option<&[T]>) -> Result<ForwardOutput<T>, NetError> {
        let torso = self.torso.forward(obs)?;
        let policy = self.policy_head.forward(&torso.output)?;
        let (value_torso, value) = match &self.value_torso {
            Some(vt) => {
                let g = critic_obs.ok_or_else(|| NetError::Config("separated critic needs a global observation".into()))?;
                let vtr = vt.forward(g)?;
                let v = self.value_head.forward(&vtr.output)?;
                (Some(vtr), v)
            }
            None => (None, self.value_head.forward(&torso.output)?),
        };
        let intrinsic = match &self.rnd {
            Some(r) => Some(r.intrinsic_value_head.forward(&torso.output)?),
            None => None,
        };
        let out = ForwardOutput {
            logits: policy.output.clone(),
            value: value.output[0],
            intrinsic_value: intrinsic.as_ref().map(|t| t.output[0]),
            trace: ForwardTrace {
                torso,
                policy,
                value_torso,
                value,
                intrinsic,
            },
        };
        if out.logits.iter().any(|l| !l.is_finite()) || !out.value.is_finite() {
            return Err(NetError::NonFinite("forward output"));
        }
        Ok(out)
    }

    /// Accumulates parameter gradients for the given head gradients.
    pub fn backprop(
        &self,
        trace: &ForwardTrace<T>,
        head: &HeadGradients<T>,
        grads: &mut Gradients<T>,
    ) -> Result<(), NetError> {
        if grads.flat.len() != self.trainable_count() {
            return Err(NetError::StaleTrace);
        }
        let lay = self.layout();
        let g = &mut grads.flat;
        let mut torso_grad = vec![T::zero(); self.torso.output_dim()];
        let pn = self.policy_head.param_count();
        if let Some(d) = self.policy_head.backward(
            &trace.policy,
            &head.logits,
            &mut g[lay.policy..lay.policy + pn],
            true,
        )? {
            add_into(&mut torso_grad, &d);
        }
        let vn = self.value_head.param_count();
        match (&self.value_torso, &trace.value_torso, lay.value_torso) {
            (Some(vt), Some(vtr), Some(off)) => {
                let dv = self
                    .value_head
                    .backward(&trace.value, &[head.value], &mut g[lay.value..lay.value + vn], true)?
                    .expect("input grad requested");
                let n = vt.param_count();
                vt.backward(vtr, &dv, &mut g[off..off + n], false)?;
            }
            (None, None, None) => {
                if let Some(d) =
                    self.value_head
                        .backward(&trace.value, &[head.value], &mut g[lay.value..lay.value + vn], true)?
                {
                    add_into(&mut torso_grad, &d);
                }
            }
            _ => return Err(NetError::StaleTrace),
        }
        match (&self.rnd, &trace.intrinsic, lay.intrinsic) {
            (Some(r), Some(itr), Some(off)) => {
                let n = r.intrinsic_value_head.param_count();
                if let Some(d) =
                    r.intrinsic_value_head
                        .backward(itr, &[head.intrinsic_value], &mut g[off..off + n], true)?
                {
                    add_into(&mut torso_grad, &d);
                }
            }
            (None, None, None) => {}
            _ => return Err(NetError::StaleTrace),
        }
        let tn = self.torso.param_count();
        self.torso
            .backward(&trace.torso, &torso_grad, &mut g[lay.torso..lay.torso + tn], false)?;
        Ok(())
    }

    /// Squared prediction error of the predictor against the frozen target,
    /// averaged over the embedding dimension.
    pub fn prediction_error(&self, obs: &[T]) -> Result<T, NetError> {
        let r = self.rnd.as_ref().ok_or_else(|| NetError::Config("network has no RND module".into()))?;
        rnd_error(&r.predictor, &r.target, obs)
    }

    /// Adds `scale · d(prediction_error)/d(predictor)` to `grads`; returns the error.
    pub fn backprop_prediction(&self, obs: &[T], scale: T, grads: &mut Gradients<T>) -> Result<T, NetError> {
        let r = self.rnd.as_ref().ok_or_else(|| NetError::Config("network has no RND module".into()))?;
        let off = self.layout().predictor.expect("rnd layout");
        let target = r.target.eval(obs)?;
        let trace = r.predictor.forward(obs)?;
        let dim = T::from_usize(target.len()).unwrap();
        let mut err = T::zero();
        let upstream: Vec<T> = trace
            .output
            .iter()
            .zip(&target)
            .map(|(&p, &t)| {
                err += (p - t) * (p - t);
                scale * T::lit(2.0) * (p - t) / dim
            })
            .collect();
        let n = r.predictor.param_count();
        r.predictor.backward(&trace, &upstream, &mut grads.flat[off..off + n], false)?;
        Ok(err / dim)
    }

    /// Copy with the torso input widened to `new_obs_dim`; the extra input
    /// columns are zero so the output on zero-padded input is unchanged.
    pub fn with_widened_input(&self, new_obs_dim: usize) -> Result<Self, NetError> {
        let old = self.obs_dim();
        if new_obs_dim < old {
            return Err(NetError::Config(format!("cannot narrow input from {old} to {new_obs_dim}")));
        }
        let mut out = self.clone();
        let first = &mut out.torso.layers[0];
        let mut w = vec![T::zero(); first.outputs * new_obs_dim];
        for o in 0..first.outputs {
            w[o * new_obs_dim..o * new_obs_dim + old].copy_from_slice(&self.torso.layers[0].weights[o * old..(o + 1) * old]);
        }
        first.weights = w;
        first.inputs = new_obs_dim;
        if let Some(r) = &mut out.rnd {
            for m in [&mut r.predictor, &mut r.target] {
                let l = &mut m.layers[0];
                let mut w = vec![T::zero(); l.outputs * new_obs_dim];
                for o in 0..l.outputs {
                    w[o * new_obs_dim..o * new_obs_dim + old].copy_from_slice(&l.weights[o * old..(o + 1) * old]);
                }
                l.weights = w;
                l.inputs = new_obs_dim;
            }
        }
        out.validate()?;
        Ok(out)
    }

    /// Converts between scalar types (e.g. for an `f32` inference copy).
    pub fn cast<U: Scalar>(&self) -> PolicyValueNet<U> {
        let conv = |m: &Mlp<T>| Mlp {
            layers: m
                .layers
                .iter()
                .map(|l| super::mlp::Dense {
                    inputs: l.inputs,
                    outputs: l.outputs,
                    weights: l.weights.iter().map(|&v| U::lit(v.as_f64())).collect(),
                    bias: l.bias.iter().map(|&v| U::lit(v.as_f64())).collect(),
                    activation: l.activation,
                })
                .collect(),
        };
        PolicyValueNet {
            torso: conv(&self.torso),
            policy_head: conv(&self.policy_head),
            value_torso: self.value_torso.as_ref().map(conv),
            value_head: conv(&self.value_head),
            rnd: self.rnd.as_ref().map(|r| RndNets {
                intrinsic_value_head: conv(&r.intrinsic_value_head),
                predictor: conv(&r.predictor),
                target: conv(&r.target),
            }),
        }
    }
}

/// Mean squared difference between the predictor and target embeddings.
pub fn rnd_error<T: Scalar>(predictor: &Mlp<T>, target: &Mlp<T>, obs: &[T]) -> Result<T, NetError> {
    let p = predictor.eval(obs)?;
    let t = target.eval(obs)?;
    if p.len() != t.len() {
        return Err(NetError::Config("predictor and target embeddings differ in width".into()));
    }
    let n = T::from_usize(p.len()).unwrap();
    Ok(p.iter().zip(&t).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>() / n)
}

fn add_into<T: Scalar>(acc: &mut [T], x: &[T]) {
    for (a, &b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}
