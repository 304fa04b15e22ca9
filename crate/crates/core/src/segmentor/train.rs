use serde::{Deserialize, Serialize};

use super::network::{Plan, Segmentor};
use crate::geometry::PointCloud;
use crate::sparse::Element;
use crate::{ClassId, Error, Result};

/// Model plus AdamW moments.
#[derive(Debug, Clone)]
pub struct TrainState<T: Element = f32> {
    pub model: Segmentor<T>,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub losses: Vec<f64>,
    pub step_seconds: Vec<f64>,
    pub final_miou: Option<f64>,
    pub final_macc: Option<f64>,
}

impl TrainReport {
    /// Training steps per second over the whole run.
    pub fn iter_per_sec(&self) -> Option<f64> {
        let total: f64 = self.step_seconds.iter().sum();
        (total > 0.0).then(|| self.step_seconds.len() as f64 / total)
    }
}

impl<T: Element> TrainState<T> {
    pub fn new(model: Segmentor<T>) -> Self {
        let n = model.params().len();
        Self {
            model,
            first_moment: vec![0.0; n],
            second_moment: vec![0.0; n],
            step: 0,
        }
    }

    /// Steps completed so far.
    pub fn steps(&self) -> usize {
        self.step
    }

    /// One optimisation step on a batch of labelled clouds. Returns the
    /// batch loss before the update.
    pub fn train_step(&mut self, batch: &[PointCloud]) -> Result<f64> {
        let plans = batch.iter().map(|c| self.model.plan(c)).collect::<Result<Vec<_>>>()?;
        let labelled = batch
            .iter()
            .zip(&plans)
            .map(|(c, p)| c.labels().map(|l| (p, l)).ok_or(Error::MissingLabels))
            .collect::<Result<Vec<_>>>()?;
        self.train_step_planned(&labelled)
    }

    /// As [`TrainState::train_step`] with precomputed plans.
    pub fn train_step_planned(&mut self, batch: &[(&Plan, &[ClassId])]) -> Result<f64> {
        let (loss, grad, _) = self.model.loss_and_grad(batch)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence { step: self.step, loss });
        }
        self.apply_adamw(&grad);
        Ok(loss)
    }

    /// Adaptive-moment update with weight decay decoupled from the gradient.
    fn apply_adamw(&mut self, grad: &[f64]) {
        let o = self.model.config().optimizer;
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - o.beta1.powi(t);
        let c2 = 1.0 - o.beta2.powi(t);
        for (((p, g), m), v) in self
            .model
            .params_mut()
            .iter_mut()
            .zip(grad)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            *m = o.beta1 * *m + (1.0 - o.beta1) * g;
            *v = o.beta2 * *v + (1.0 - o.beta2) * g * g;
            let pv = p.to_f64();
            let update = (*m / c1) / ((*v / c2).sqrt() + o.eps) + o.weight_decay * pv;
            *p = T::from_f64(pv - o.lr * update);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::VoxelizationConfig;
    use crate::segmentor::SegmentorConfig;

    fn toy() -> (SegmentorConfig, PointCloud) {
        let cfg = SegmentorConfig {
            voxel: VoxelizationConfig::cartesian([0.0; 3], [4.0; 3], 1.0),
            num_classes: 2,
            ..SegmentorConfig::default()
        };
        let cloud = PointCloud::new(
            vec![[0.2, 0.3, 0.4], [0.6, 0.5, 0.1], [0.9, 0.9, 0.9]],
            vec![0.1, 0.5, 0.9],
            Some(vec![1, 1, 1]),
        )
        .unwrap();
        (cfg, cloud)
    }

    #[test]
    fn single_voxel_two_class_problem_converges() {
        let (cfg, cloud) = toy();
        let mut state = TrainState::new(Segmentor::<f32>::new(cfg).unwrap());
        let batch = [cloud];
        let mut last = f64::INFINITY;
        for _ in 0..100 {
            last = state.train_step(&batch).unwrap();
        }
        let final_loss = state
            .model
            .loss_and_grad(&[(&state.model.plan(&batch[0]).unwrap(), batch[0].labels().unwrap())])
            .unwrap()
            .0;
        assert!(final_loss < 0.05, "loss {final_loss} (last step {last})");
    }

    #[test]
    fn zero_step_size_keeps_parameters() {
        let (mut cfg, cloud) = toy();
        cfg.optimizer.lr = 0.0;
        let model = Segmentor::<f32>::new(cfg).unwrap();
        let mut state = TrainState::new(model.clone());
        for _ in 0..3 {
            state.train_step(std::slice::from_ref(&cloud)).unwrap();
        }
        assert_eq!(state.model, model);
    }

    #[test]
    fn loss_trace_is_reproducible() {
        let (cfg, cloud) = toy();
        let run = || {
            let mut state = TrainState::new(Segmentor::<f32>::new(cfg.clone()).unwrap());
            (0..10)
                .map(|_| state.train_step(std::slice::from_ref(&cloud)).unwrap())
                .collect::<Vec<_>>()
        };
        let (a, b) = (run(), run());
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn divergence_reports_step() {
        let (mut cfg, cloud) = toy();
        cfg.optimizer.lr = 1e30;
        let mut state = TrainState::new(Segmentor::<f32>::new(cfg).unwrap());
        let mut err = None;
        for _ in 0..10 {
            if let Err(e) = state.train_step(std::slice::from_ref(&cloud)) {
                err = Some(e);
                break;
            }
        }
        match err {
            Some(Error::Divergence { step, .. }) => assert!(step >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn unlabeled_batch_is_rejected() {
        let (cfg, cloud) = toy();
        let mut state = TrainState::new(Segmentor::<f32>::new(cfg).unwrap());
        assert!(matches!(
            state.train_step(&[cloud.without_labels()]),
            Err(Error::MissingLabels)
        ));
    }
}
