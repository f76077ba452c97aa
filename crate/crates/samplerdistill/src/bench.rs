//! Teacher/student speed benchmark.

use crate::sampler::euler_sample;
use crate::schedule::make_schedule;
use crate::Result;
use ditcore::{ConditionBundle, DiT};
use latentcodec::LatentSeq;
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SamplerCfg {
    pub steps: usize,
    pub shift: f64,
    pub cfg_scale: f64,
}

impl SamplerCfg {
    /// Model evaluations for one full sample.
    pub fn evals(&self) -> usize {
        let passes = if self.cfg_scale == 0.0 || self.cfg_scale == 1.0 { 1 } else { 2 };
        self.steps * passes
    }
}

/// The paper-default teacher (50 steps, guided) and student (8 steps,
/// shift 3, guidance-free).
pub fn default_teacher_cfg() -> SamplerCfg {
    SamplerCfg { steps: 50, shift: 1.0, cfg_scale: 4.0 }
}

pub fn default_student_cfg() -> SamplerCfg {
    SamplerCfg { steps: 8, shift: 3.0, cfg_scale: 0.0 }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub teacher: SamplerCfg,
    pub student: SamplerCfg,
    pub teacher_latencies_ms: Vec<f64>,
    pub student_latencies_ms: Vec<f64>,
    pub teacher_median_ms: f64,
    pub student_median_ms: f64,
    /// Wall-clock speedup (teacher / student).
    pub wall_ratio: f64,
    /// Model-evaluation ratio from the configured step counts.
    pub eval_ratio: f64,
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[v.len() / 2]
}

/// Times both samplers over `n_runs` generations of the same shape.
#[allow(clippy::too_many_arguments)]
pub fn speed_benchmark(
    teacher_model: &DiT,
    student_model: &DiT,
    cond: &ConditionBundle,
    null_cond: &ConditionBundle,
    teacher: SamplerCfg,
    student: SamplerCfg,
    t_frames: usize,
    n_runs: usize,
) -> Result<BenchReport> {
    let source = LatentSeq::zeros(t_frames, 64, 25.0);
    let mask = vec![1.0f32; t_frames];
    let teacher_schedule = make_schedule(teacher.steps, teacher.shift)?;
    let student_schedule = make_schedule(student.steps, student.shift)?;

    let mut teacher_latencies = Vec::with_capacity(n_runs);
    let mut student_latencies = Vec::with_capacity(n_runs);
    for run in 0..n_runs {
        let t0 = Instant::now();
        euler_sample(
            teacher_model,
            cond,
            Some(null_cond),
            &teacher_schedule,
            teacher.cfg_scale,
            &source,
            &mask,
            run as u64,
        )?;
        teacher_latencies.push(t0.elapsed().as_secs_f64() * 1000.0);

        let t0 = Instant::now();
        euler_sample(
            student_model,
            cond,
            Some(null_cond),
            &student_schedule,
            student.cfg_scale,
            &source,
            &mask,
            run as u64,
        )?;
        student_latencies.push(t0.elapsed().as_secs_f64() * 1000.0);
    }

    let teacher_median = median(&teacher_latencies);
    let student_median = median(&student_latencies);
    Ok(BenchReport {
        teacher,
        student,
        teacher_median_ms: teacher_median,
        student_median_ms: student_median,
        wall_ratio: teacher_median / student_median,
        eval_ratio: teacher.evals() as f64 / student.evals() as f64,
        teacher_latencies_ms: teacher_latencies,
        student_latencies_ms: student_latencies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_eval_ratio_is_12_5() {
        let r = default_teacher_cfg().evals() as f64 / default_student_cfg().evals() as f64;
        assert_eq!(r, 12.5);
    }

    #[test]
    fn equal_configs_ratio_one() {
        let cfg = SamplerCfg { steps: 8, shift: 1.0, cfg_scale: 0.0 };
        assert_eq!(cfg.evals() as f64 / cfg.evals() as f64, 1.0);
    }
}
