use crate::error::{Error, Result};

/// Shannon entropy in bits per symbol of the distribution given by `counts`.
pub fn entropy(counts: &[u64]) -> Result<f64> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::input("entropy of an all-zero count vector"));
    }
    let total = total as f64;
    Ok(counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum())
}

/// Lower bound, in bits, on any symbol-by-symbol code for a stream with these counts.
pub fn entropy_bound_bits(counts: &[u64]) -> Result<f64> {
    let total: u64 = counts.iter().sum();
    Ok(entropy(counts)? * total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        let uniform391 = entropy(&vec![7; 391]).unwrap();
        assert!((uniform391 - 391f64.log2()).abs() < 1e-12);
        assert!((uniform391 - 8.611).abs() < 1e-3);
        assert!((entropy(&[5, 5, 5, 5]).unwrap() - 2.0).abs() < 1e-12);
        assert!((entropy(&[2, 1, 1]).unwrap() - 1.5).abs() < 1e-12);
        assert_eq!(entropy(&[0, 9, 0]).unwrap(), 0.0);
        assert!(entropy(&[0, 0]).is_err());
        assert!(entropy(&[]).is_err());
    }
}
