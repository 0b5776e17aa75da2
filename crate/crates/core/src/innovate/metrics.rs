use crate::error::{Error, Result};

pub fn mae(y: &[f64], yhat: &[f64]) -> Result<f64> {
    if y.len() != yhat.len() || y.is_empty() {
        return Err(Error::InvalidInput("mae needs equal, non-empty inputs".into()));
    }
    Ok(y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64)
}

/// `(2/n) * sum(y ln(y/yhat) - (y - yhat))`, with `y ln y = 0` at `y = 0`.
pub fn mean_poisson_deviance(y: &[f64], yhat: &[f64]) -> Result<f64> {
    if y.len() != yhat.len() || y.is_empty() {
        return Err(Error::InvalidInput("deviance needs equal, non-empty inputs".into()));
    }
    let mut total = 0.0;
    for (&yi, &mi) in y.iter().zip(yhat) {
        if mi <= 0.0 || !mi.is_finite() {
            return Err(Error::InvalidInput(format!(
                "Poisson deviance needs positive predictions, got {mi}"
            )));
        }
        let term = if yi > 0.0 { yi * (yi / mi).ln() } else { 0.0 };
        total += term - (yi - mi);
    }
    Ok(2.0 * total / y.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_values() {
        assert!((mae(&[0.0, 2.0, 4.0], &[2.0; 3]).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(mean_poisson_deviance(&[1.0, 3.0, 0.5], &[1.0, 3.0, 0.5]).unwrap(), 0.0);
        let d = mean_poisson_deviance(&[2.0], &[1.0]).unwrap();
        assert!((d - 0.772_588_722_239_781).abs() < 1e-12);
    }

    #[test]
    fn zero_prediction_rejected() {
        assert!(mean_poisson_deviance(&[1.0], &[0.0]).is_err());
        assert!(mean_poisson_deviance(&[0.0], &[0.5]).unwrap() > 0.0);
    }
}
