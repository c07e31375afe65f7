use serde::Serialize;

use crate::error::{GeometryError, Result};

/// A point of an ODE trajectory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OdeState {
    pub t: f64,
    pub value: Vec<f64>,
}

impl OdeState {
    pub fn new(t: f64, value: Vec<f64>) -> Self {
        Self { t, value }
    }

    pub fn dim(&self) -> usize {
        self.value.len()
    }
}

fn combine(base: &[f64], k: &[f64], h: f64) -> Vec<f64> {
    base.iter().zip(k).map(|(b, d)| b + h * d).collect()
}

/// One classical Runge-Kutta step.
pub fn rk4_step<F>(rhs: &F, state: &OdeState, h: f64) -> Result<OdeState>
where
    F: Fn(f64, &[f64]) -> Vec<f64> + ?Sized,
{
    let (t, y) = (state.t, &state.value);
    let k1 = rhs(t, y);
    let k2 = rhs(t + h / 2.0, &combine(y, &k1, h / 2.0));
    let k3 = rhs(t + h / 2.0, &combine(y, &k2, h / 2.0));
    let k4 = rhs(t + h, &combine(y, &k3, h));
    if [&k1, &k2, &k3, &k4].iter().any(|k| k.len() != y.len()) {
        return Err(GeometryError::DimensionMismatch {
            expected: y.len(),
            found: k1.len(),
        });
    }
    let value: Vec<f64> = (0..y.len())
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    if value.iter().any(|v| !v.is_finite()) {
        return Err(GeometryError::NonFiniteState { t: t + h });
    }
    Ok(OdeState::new(t + h, value))
}

/// Fixed-step RK4 from `init.t` to `t_end`; the last step is shortened to land on
/// `t_end` exactly. Returns the full trajectory including the initial state.
pub fn integrate_ode<F>(rhs: &F, init: OdeState, t_end: f64, step: f64) -> Result<Vec<OdeState>>
where
    F: Fn(f64, &[f64]) -> Vec<f64> + ?Sized,
{
    if !(step > 0.0) {
        return Err(GeometryError::InvalidInput(format!(
            "ODE step must be positive, got {step}"
        )));
    }
    if init.value.iter().any(|v| !v.is_finite()) {
        return Err(GeometryError::NonFiniteState { t: init.t });
    }
    let dir = if t_end >= init.t { 1.0 } else { -1.0 };
    let mut out = vec![init];
    loop {
        let cur = out.last().expect("trajectory is never empty");
        let remaining = (t_end - cur.t) * dir;
        if remaining <= 1e-12 * step {
            break;
        }
        let h = dir * step.min(remaining);
        let next = rk4_step(rhs, cur, h)?;
        out.push(next);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth() {
        let traj = integrate_ode(&|_, y: &[f64]| vec![y[0]], OdeState::new(0.0, vec![1.0]), 1.0, 1e-3).unwrap();
        let last = traj.last().unwrap();
        assert!((last.t - 1.0).abs() < 1e-12);
        assert!((last.value[0] - std::f64::consts::E).abs() < 1e-6);
    }

    #[test]
    fn zero_rhs_is_constant() {
        let traj = integrate_ode(
            &|_, y: &[f64]| vec![0.0; y.len()],
            OdeState::new(0.0, vec![2.0, -3.0]),
            0.5,
            0.1,
        )
        .unwrap();
        assert!(traj.iter().all(|s| s.value == vec![2.0, -3.0]));
    }

    #[test]
    fn scalar_riccati_decay() {
        // dX/dt = -X^2, X(0) = I (diagonal 2x2): X(t) = 1/(1+t)
        let rhs = |_: f64, y: &[f64]| y.iter().map(|v| -v * v).collect::<Vec<_>>();
        let traj = integrate_ode(&rhs, OdeState::new(0.0, vec![1.0, 1.0]), 1.0, 1e-3).unwrap();
        for v in &traj.last().unwrap().value {
            assert!((v - 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn non_finite_state_is_an_error() {
        let rhs = |_: f64, y: &[f64]| vec![y[0] * y[0]];
        let err = integrate_ode(&rhs, OdeState::new(0.0, vec![1.0]), 5.0, 0.1).unwrap_err();
        assert!(matches!(err, GeometryError::NonFiniteState { .. }));
    }

    #[test]
    fn rejects_bad_step() {
        assert!(integrate_ode(&|_, y: &[f64]| y.to_vec(), OdeState::new(0.0, vec![1.0]), 1.0, 0.0).is_err());
    }
}
