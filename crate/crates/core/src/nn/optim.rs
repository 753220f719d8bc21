use super::{Gradients, NnError, Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named trainable tensors, each optionally frozen.
#[derive(Clone, Debug, Default)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    frozen: Vec<bool>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, t: Tensor) -> ParamId {
        self.names.push(name.into());
        self.tensors.push(t);
        self.frozen.push(false);
        ParamId(self.tensors.len() - 1)
    }

    pub fn freeze(&mut self, id: ParamId) {
        self.frozen[id.0] = true;
    }

    pub fn is_frozen(&self, id: ParamId) -> bool {
        self.frozen[id.0]
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    /// Total scalar count over all tensors.
    pub fn numel(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Registers every tensor as a tape leaf; frozen ones become constants.
    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.tensors
            .iter()
            .zip(&self.frozen)
            .map(|(t, &frozen)| tape.leaf(t.clone(), !frozen))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

/// Bias-corrected Adam without weight decay.
///
/// Moments exist only for parameters that were unfrozen when the optimizer
/// was created.
#[derive(Clone, Debug)]
pub struct Adam {
    cfg: AdamConfig,
    step_count: u64,
    moments: Vec<Option<(Tensor, Tensor)>>,
}

impl Adam {
    pub fn new(cfg: AdamConfig, params: &ParamSet) -> Self {
        let moments = params
            .tensors
            .iter()
            .zip(&params.frozen)
            .map(|(t, &frozen)| (!frozen).then(|| (Tensor::zeros(t.shape()), Tensor::zeros(t.shape()))))
            .collect();
        Self {
            cfg,
            step_count: 0,
            moments,
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.cfg
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Number of parameter tensors holding optimizer state.
    pub fn tracked(&self) -> usize {
        self.moments.iter().filter(|m| m.is_some()).count()
    }

    /// Scalar count of tracked parameters.
    pub fn tracked_numel(&self) -> usize {
        self.moments.iter().flatten().map(|(m, _)| m.len()).sum()
    }

    /// Applies one update with gradients of `vars` (as returned by [`ParamSet::bind`]).
    pub fn step(&mut self, params: &mut ParamSet, vars: &[Var], grads: &Gradients) -> Result<(), NnError> {
        let gs: Vec<Option<&Tensor>> = vars.iter().map(|&v| grads.get(v)).collect();
        self.step_with(params, &gs)
    }

    /// Applies one update from explicit per-parameter gradients.
    pub fn step_with(&mut self, params: &mut ParamSet, grads: &[Option<&Tensor>]) -> Result<(), NnError> {
        if grads.len() != params.len() || self.moments.len() != params.len() {
            return Err(NnError::ShapeMismatch {
                op: "adam_step",
                left: vec![params.len()],
                right: vec![grads.len()],
            });
        }
        for (i, g) in grads.iter().enumerate() {
            if let (Some(g), Some(_)) = (g, &self.moments[i]) {
                if g.shape() != params.tensors[i].shape() {
                    return Err(NnError::ShapeMismatch {
                        op: "adam_step",
                        left: params.tensors[i].shape().to_vec(),
                        right: g.shape().to_vec(),
                    });
                }
            }
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.cfg;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        for (i, g) in grads.iter().enumerate() {
            let (Some(g), Some((m, v))) = (g, self.moments[i].as_mut()) else {
                continue;
            };
            if params.frozen[i] {
                continue;
            }
            let p = params.tensors[i].data_mut();
            for (((pv, mv), vv), gv) in p
                .iter_mut()
                .zip(m.data_mut().iter_mut())
                .zip(v.data_mut().iter_mut())
                .zip(g.data())
            {
                *mv = beta1 * *mv + (1.0 - beta1) * gv;
                *vv = beta2 * *vv + (1.0 - beta2) * gv * gv;
                let mhat = *mv / bc1;
                let vhat = *vv / bc2;
                *pv -= learning_rate * mhat / (vhat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

/// Plain gradient descent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sgd {
    pub learning_rate: f64,
}

impl Sgd {
    pub fn apply(&self, param: &mut Tensor, grad: &Tensor) -> Result<(), NnError> {
        if param.shape() != grad.shape() {
            return Err(NnError::ShapeMismatch {
                op: "sgd_step",
                left: param.shape().to_vec(),
                right: grad.shape().to_vec(),
            });
        }
        for (p, g) in param.data_mut().iter_mut().zip(grad.data()) {
            *p -= self.learning_rate * g;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_param(value: f64) -> (ParamSet, ParamId) {
        let mut ps = ParamSet::new();
        let id = ps.add("w", Tensor::vector(vec![value; 3]));
        (ps, id)
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let (mut ps, id) = one_param(0.5);
        let mut adam = Adam::new(AdamConfig::default(), &ps);
        let g = Tensor::vector(vec![1.0; 3]);
        adam.step_with(&mut ps, &[Some(&g)]).unwrap();
        for &v in ps.get(id).data() {
            // -lr * 1 / (1 + 1e-8)
            assert!((v - 0.5 - (-0.01)).abs() < 1e-6);
        }
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let (mut ps, id) = one_param(0.25);
        let mut adam = Adam::new(AdamConfig::default(), &ps);
        let g = Tensor::zeros(&[3]);
        for _ in 0..10 {
            adam.step_with(&mut ps, &[Some(&g)]).unwrap();
        }
        assert_eq!(ps.get(id).data(), &[0.25; 3]);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let (mut ps, _) = one_param(0.0);
        let mut adam = Adam::new(AdamConfig::default(), &ps);
        let g = Tensor::zeros(&[4]);
        assert!(adam.step_with(&mut ps, &[Some(&g)]).is_err());
        assert_eq!(adam.step_count(), 0);
    }

    #[test]
    fn frozen_params_untracked_and_untouched() {
        let mut ps = ParamSet::new();
        let a = ps.add("a", Tensor::vector(vec![1.0]));
        let b = ps.add("b", Tensor::vector(vec![2.0]));
        ps.freeze(b);
        let mut adam = Adam::new(AdamConfig::default(), &ps);
        assert_eq!(adam.tracked(), 1);
        let g = Tensor::vector(vec![1.0]);
        for _ in 0..5 {
            adam.step_with(&mut ps, &[Some(&g), Some(&g)]).unwrap();
        }
        assert_ne!(ps.get(a).data()[0], 1.0);
        assert_eq!(ps.get(b).data()[0].to_bits(), 2.0f64.to_bits());
    }
}
