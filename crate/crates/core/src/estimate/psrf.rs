//! Gelman-Rubin potential scale reduction factor.

use crate::error::Error;
use crate::Result;

/// PSRF for one parameter across chains.
///
/// With within-chain variance `W` (mean of per-chain sample variances) and
/// between-chain variance `B = n * Var(chain means)`, the statistic is
///
/// ```text
/// sqrt( ((n-1)/n * W + B/n) / ((n-1)/n * W) ) = sqrt(1 + B / ((n-1) W))
/// ```
///
/// Numerator and denominator share the same within-chain normalization, so
/// identical chains give exactly 1. Values near 1 indicate convergence;
/// above 1.1 is conventionally taken as not converged.
pub fn psrf(chains: &[Vec<f64>]) -> Result<f64> {
    let m = chains.len();
    if m < 2 {
        return Err(Error::InsufficientChains);
    }
    let n = chains[0].len();
    if n < 2 || chains.iter().any(|c| c.len() != n) {
        return Err(Error::InsufficientChains);
    }
    let nf = n as f64;
    let mut means = Vec::with_capacity(m);
    let mut within = 0.0;
    for chain in chains {
        let mean = chain.iter().sum::<f64>() / nf;
        let var = chain.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
        means.push(mean);
        within += var;
    }
    within /= m as f64;
    if within == 0.0 {
        return Err(Error::ZeroWithinVariance);
    }
    let grand = means.iter().sum::<f64>() / m as f64;
    let between = nf * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>() / (m as f64 - 1.0);
    Ok((1.0 + between / ((nf - 1.0) * within)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Domain, Stream};

    #[test]
    fn identical_chains_give_exactly_one() {
        let chain: Vec<f64> = (0..100).map(|i| (i as f64).sin()).collect();
        let r = psrf(&[chain.clone(), chain]).unwrap();
        assert_eq!(r, 1.0);
    }

    #[test]
    fn separated_chains_blow_up() {
        // Chains at N(0,1) and N(10,1): plugging the means and variances
        // into the formula gives sqrt(1 + n*50/(n-1)) ~ sqrt(51).
        let n = 10_000;
        let mut rng = Stream::new(10, Domain::Test, 0);
        let draw = |rng: &mut Stream| {
            // sum of 12 uniforms minus 6: near-normal with unit variance
            (0..12).map(|_| rng.uniform()).sum::<f64>() - 6.0
        };
        let a: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        let b: Vec<f64> = (0..n).map(|_| draw(&mut rng) + 10.0).collect();
        let r = psrf(&[a, b]).unwrap();
        assert!(r > 5.0, "psrf {r}");
        assert!((r - 51f64.sqrt()).abs() < 0.5, "psrf {r}");
    }

    #[test]
    fn error_paths() {
        assert!(matches!(
            psrf(&[vec![1.0, 2.0]]),
            Err(Error::InsufficientChains)
        ));
        assert!(matches!(
            psrf(&[vec![1.0], vec![1.0]]),
            Err(Error::InsufficientChains)
        ));
        assert!(matches!(
            psrf(&[vec![1.0, 2.0], vec![1.0]]),
            Err(Error::InsufficientChains)
        ));
        assert!(matches!(
            psrf(&[vec![3.0, 3.0], vec![4.0, 4.0]]),
            Err(Error::ZeroWithinVariance)
        ));
    }
}
