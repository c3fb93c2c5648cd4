use crate::error::{invalid, Result};

pub const MAX_FREQUENCY: f64 = 1.0e4;

/// Sinusoidal features of a scalar in `[0, 1]`.
///
/// With `K = dim / 2`, frequency `k` is `MAX_FREQUENCY^(k / (K - 1))`, so the
/// frequencies run geometrically from 1 to 10^4. Output layout is all sines
/// followed by all cosines.
pub fn sinusoidal_embedding(t: f64, dim: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; dim];
    sinusoidal_embedding_into(t, &mut out)?;
    Ok(out)
}

pub fn sinusoidal_embedding_into(t: f64, out: &mut [f64]) -> Result<()> {
    let dim = out.len();
    if dim < 2 || !dim.is_multiple_of(2) {
        return Err(invalid(format!("embedding dimension must be even and >= 2, got {dim}")));
    }
    let half = dim / 2;
    for k in 0..half {
        let w = frequency(k, half);
        out[k] = (t * w).sin();
        out[half + k] = (t * w).cos();
    }
    Ok(())
}

fn frequency(k: usize, half: usize) -> f64 {
    if half == 1 {
        1.0
    } else {
        MAX_FREQUENCY.powf(k as f64 / (half - 1) as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_time() {
        assert_eq!(sinusoidal_embedding(0.0, 4).unwrap(), vec![0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn odd_dim_rejected() {
        assert!(sinusoidal_embedding(0.3, 5).is_err());
        assert!(sinusoidal_embedding(0.3, 0).is_err());
    }

    #[test]
    fn half_time_table() {
        // Frequencies 1, 10^(4/3), 10^(8/3), 10^4 evaluated at t = 0.5 with
        // mpmath at 30 digits.
        let want = [
            0.479425538604203,
            -0.9751496438354769,
            -0.3879576817682789,
            -0.9879664387667768,
            0.8775825618903727,
            -0.2215472232449383,
            0.9216771870655055,
            0.1546684061807471,
        ];
        let got = sinusoidal_embedding(0.5, 8).unwrap();
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-12, "{g} vs {w}");
        }
    }

    proptest! {
        #[test]
        fn entries_bounded(t in 0.0f64..=1.0, half in 1usize..32) {
            for v in sinusoidal_embedding(t, 2 * half).unwrap() {
                prop_assert!((-1.0..=1.0).contains(&v));
            }
        }
    }
}
