use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{config_err, Result};

/// Down-converted real voltage and its envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct HeterodyneTrace {
    pub time: Vec<f64>,
    pub voltage: Vec<f64>,
    pub envelope: Vec<f64>,
}

/// Minimum grid samples per intermediate-frequency period.
pub const MIN_SAMPLES_PER_IF_PERIOD: f64 = 10.0;

/// Mixes the baseband field up to `intermediate_frequency`:
/// `v(t) = Re[s(t)·exp(i·2π·IF·t)]`, envelope `|s(t)|`.
pub fn heterodyne_render(
    time: &[f64],
    field: &[Complex64],
    intermediate_frequency: f64,
) -> Result<HeterodyneTrace> {
    if time.len() != field.len() {
        return Err(config_err!("time grid and field lengths differ"));
    }
    if !(intermediate_frequency.is_finite() && intermediate_frequency >= 0.0) {
        return Err(config_err!("intermediate frequency must be non-negative"));
    }
    if let [t0, t1, ..] = time {
        let per_period = 1.0 / (intermediate_frequency * (t1 - t0));
        if intermediate_frequency > 0.0 && per_period < MIN_SAMPLES_PER_IF_PERIOD {
            return Err(config_err!(
                "{per_period:.2} samples per IF period; at least {MIN_SAMPLES_PER_IF_PERIOD} needed"
            ));
        }
    }
    let voltage = time
        .iter()
        .zip(field)
        .map(|(&t, s)| (s * Complex64::from_polar(1.0, 2.0 * PI * intermediate_frequency * t)).re)
        .collect();
    Ok(HeterodyneTrace {
        time: time.to_vec(),
        voltage,
        envelope: field.iter().map(|s| s.norm()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_is_field_magnitude() {
        let t: Vec<f64> = (0..400).map(|k| k as f64 * 0.5e-9).collect();
        let s: Vec<Complex64> = t
            .iter()
            .map(|&x| Complex64::from_polar((-x * 1e7).exp(), x * 3e7))
            .collect();
        let r = heterodyne_render(&t, &s, 80e6).unwrap();
        for (e, z) in r.envelope.iter().zip(&s) {
            assert_eq!(*e, z.norm());
        }
        assert!(r
            .voltage
            .iter()
            .zip(&r.envelope)
            .all(|(v, e)| v.abs() <= e + 1e-15));
    }

    #[test]
    fn resolution_requirement() {
        let t: Vec<f64> = (0..10).map(|k| k as f64 * 0.5e-9).collect();
        let s = vec![Complex64::new(0.0, 0.0); 10];
        let r = heterodyne_render(&t, &s, 80e6).unwrap();
        assert!(r.voltage.iter().all(|v| *v == 0.0));
        assert!(matches!(
            heterodyne_render(&t, &s, 300e6),
            Err(crate::Error::Configuration(_))
        ));
    }
}
