use crate::environment::{pair_moment, DisorderSpec};
use crate::error::{Error, Result};
use crate::geometry::Face;
use crate::rate_functions::tilted_weights;
use crate::scalar::Real;
use crate::stochastics::pair_walk;

/// `E[Z_{j,theta}^2]` for `j = 0..=n`.
///
/// Two independent tilted walks; a step taken from a shared site (projected
/// difference `0`) picks up `E[omega_e omega_e'] / (alpha_e alpha_e')`.
pub fn second_moment_sequence<T: Real>(
    spec: &DisorderSpec<T>,
    face: &Face,
    theta: &[T],
    n: usize,
    budget_bytes: u128,
) -> Result<Vec<T>> {
    if theta.len() + 1 != face.dim() || face.dim() != spec.dim() {
        return Err(Error::invalid("theta must have d-1 entries and match the spec dimension"));
    }
    let d = face.dim();
    let weights = tilted_weights(&spec.alpha, face, theta);
    let mut ratio = vec![T::one(); d * d];
    for i in 0..d {
        for j in 0..d {
            let (e, f) = (face.jump(i), face.jump(j));
            ratio[i * d + j] = pair_moment(spec, e, f) / (spec.alpha.get(e) * spec.alpha.get(f));
        }
    }
    let (totals, _) = pair_walk(&weights, n, |i, j| ratio[i * d + j], budget_bytes)?;
    Ok(totals)
}

/// `E[Z_{n,theta}^2]`, exact over the finite support of `eta`.
pub fn second_moment_exact<T: Real>(
    spec: &DisorderSpec<T>,
    face: &Face,
    theta: &[T],
    n: usize,
    budget_bytes: u128,
) -> Result<T> {
    Ok(second_moment_sequence(spec, face, theta, n, budget_bytes)?[n])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{EtaLaw, JumpLaw};

    #[test]
    fn eps_zero_is_one() {
        let alpha = JumpLaw::uniform(4).unwrap();
        let eta = EtaLaw::default_two_point(&alpha).unwrap();
        let spec = DisorderSpec::new(alpha, eta, 0.0).unwrap();
        let f = Face::positive(4).unwrap();
        let s = second_moment_sequence(&spec, &f, &[0.4, -0.3, 0.1], 8, u128::MAX).unwrap();
        assert!(s.iter().all(|v: &f64| (v - 1.0).abs() < 1e-13));
    }

    #[test]
    fn one_step_hand_expansion() {
        let alpha = JumpLaw::new(vec![0.2, 0.05, 0.1, 0.1, 0.15, 0.1, 0.25, 0.05]).unwrap();
        let eta = EtaLaw::two_point(&alpha, &[1.0, -0.5, 0.2, 0.0, -1.0, 0.3, 0.6, -0.2]).unwrap();
        let spec = DisorderSpec::new(alpha.clone(), eta.clone(), 0.45).unwrap();
        let f = Face::new(vec![1, 1, -1, 1]).unwrap();
        let th = [0.2, -0.3, 0.5];
        let w = tilted_weights(&alpha, &f, &th);
        let mut expect = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                let c = eta.second_moment(f.jump(i).index(), f.jump(j).index());
                expect += w[i] * w[j] * (1.0 + 0.45f64.powi(2) * c);
            }
        }
        let got = second_moment_exact(&spec, &f, &th, 1, u128::MAX).unwrap();
        assert!((got - expect).abs() < 1e-15);
    }
}
