//! One-cycle learning-rate schedule: cosine ramp from lr_max/div_factor up
//! to lr_max over the warmup span, then cosine decay down to
//! lr_max/final_div. Momentum runs the opposite cycle, high-low-high, so
//! the optimizer is most agile where the learning rate peaks.

use std::f64::consts::PI;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("step {step} outside schedule of {total_steps} steps")]
    StepOutOfRange { step: usize, total_steps: usize },
    #[error("bad schedule: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone, Copy)]
pub struct ScheduleConfig {
    pub lr_max: f64,
    pub div_factor: f64,
    pub final_div: f64,
    pub total_steps: usize,
    pub warmup_fraction: f64,
    pub momentum_min: f64,
    pub momentum_max: f64,
}

impl ScheduleConfig {
    pub fn new(lr_max: f64, total_steps: usize) -> Self {
        ScheduleConfig {
            lr_max,
            div_factor: 25.0,
            final_div: 1e4,
            total_steps,
            warmup_fraction: 0.3,
            momentum_min: 0.85,
            momentum_max: 0.95,
        }
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        let err = |msg: String| Err(ScheduleError::BadConfig(msg));
        if !(self.lr_max.is_finite() && self.lr_max > 0.0) {
            return err(format!("lr_max {} must be positive", self.lr_max));
        }
        if self.div_factor < 1.0 || self.final_div < 1.0 {
            return err("divisors must be at least 1 so the rate stays positive".into());
        }
        if self.total_steps < 2 {
            return err(format!("{} steps leave no room for a cycle", self.total_steps));
        }
        if !(self.warmup_fraction > 0.0 && self.warmup_fraction < 1.0) {
            return err(format!("warmup fraction {} outside (0, 1)", self.warmup_fraction));
        }
        if !(0.0 < self.momentum_min && self.momentum_min <= self.momentum_max && self.momentum_max < 1.0) {
            return err(format!(
                "momentum range {}..{} outside (0, 1)",
                self.momentum_min, self.momentum_max
            ));
        }
        Ok(())
    }

    /// Last step of the ramp; both phases keep at least one step.
    fn warmup_end(&self) -> usize {
        let w = (self.warmup_fraction * self.total_steps as f64).round() as usize;
        w.clamp(1, self.total_steps - 1)
    }

    fn check_step(&self, step: usize) -> Result<(), ScheduleError> {
        if step > self.total_steps {
            return Err(ScheduleError::StepOutOfRange { step, total_steps: self.total_steps });
        }
        Ok(())
    }
}

/// Half-cosine interpolation from `a` at t=0 to `b` at t=1.
fn cosine(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * (1.0 - (PI * t).cos()) / 2.0
}

pub fn lr_at(step: usize, sched: &ScheduleConfig) -> Result<f64, ScheduleError> {
    sched.validate()?;
    sched.check_step(step)?;
    let w = sched.warmup_end();
    let lo = sched.lr_max / sched.div_factor;
    let end = sched.lr_max / sched.final_div;
    Ok(if step <= w {
        cosine(lo, sched.lr_max, step as f64 / w as f64)
    } else {
        cosine(sched.lr_max, end, (step - w) as f64 / (sched.total_steps - w) as f64)
    })
}

pub fn momentum_at(step: usize, sched: &ScheduleConfig) -> Result<f64, ScheduleError> {
    sched.validate()?;
    sched.check_step(step)?;
    let w = sched.warmup_end();
    Ok(if step <= w {
        cosine(sched.momentum_max, sched.momentum_min, step as f64 / w as f64)
    } else {
        cosine(sched.momentum_min, sched.momentum_max, (step - w) as f64 / (sched.total_steps - w) as f64)
    })
}
