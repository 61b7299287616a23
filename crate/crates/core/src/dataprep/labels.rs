//! Base-3 state labels.
//!
//! A prepared state `|q_0 q_1 … q_{N-1}⟩` is stored as a digit vector indexed by
//! qubit, leftmost ket digit first. The rightmost digit is least significant, so
//! `|22102⟩` encodes to `2·3⁰ + 0·3¹ + 1·3² + 2·3³ + 2·3⁴ = 227`.

use crate::error::{Error, Result};

/// Largest register size for which `3^N` labels are addressable.
pub const MAX_QUBITS: usize = 20;

/// Number of basis states, `3^N`.
pub fn num_states(n_qubits: usize) -> usize {
    3usize.pow(n_qubits as u32)
}

pub fn encode_label(digits: &[u8]) -> Result<usize> {
    if digits.len() > MAX_QUBITS {
        return Err(Error::invalid(format!("{} qubits exceeds maximum {MAX_QUBITS}", digits.len())));
    }
    digits.iter().enumerate().try_fold(0usize, |acc, (position, &digit)| {
        if digit > 2 {
            return Err(Error::InvalidDigit { digit, position });
        }
        Ok(acc * 3 + digit as usize)
    })
}

pub fn decode_label(label: usize, n_qubits: usize) -> Result<Vec<u8>> {
    if n_qubits > MAX_QUBITS || label >= num_states(n_qubits) {
        return Err(Error::LabelOutOfRange { label, n_qubits });
    }
    let mut digits = vec![0u8; n_qubits];
    let mut rest = label;
    for d in digits.iter_mut().rev() {
        *d = (rest % 3) as u8;
        rest /= 3;
    }
    Ok(digits)
}

/// Digit of `qubit` inside `label` without allocating. Caller guarantees range.
#[inline]
pub fn digit_of(label: usize, qubit: usize, n_qubits: usize) -> u8 {
    let shift = n_qubits - 1 - qubit;
    ((label / 3usize.pow(shift as u32)) % 3) as u8
}

pub fn one_hot(label: usize, num_classes: usize) -> Result<Vec<f64>> {
    if label >= num_classes {
        return Err(Error::invalid(format!("label {label} out of range for {num_classes} classes")));
    }
    let mut v = vec![0.0; num_classes];
    v[label] = 1.0;
    Ok(v)
}

/// Render digits as a ket string, e.g. `|0210⟩`.
pub fn ket(digits: &[u8]) -> String {
    let body: String = digits.iter().map(|d| char::from(b'0' + d)).collect();
    format!("|{body}⟩")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_labels() {
        assert_eq!(encode_label(&[2, 2, 1, 0, 2]).unwrap(), 227);
        assert_eq!(encode_label(&[0, 0, 0, 0, 0]).unwrap(), 0);
        assert_eq!(encode_label(&[0, 0, 0, 0, 1]).unwrap(), 1);
        assert_eq!(decode_label(227, 5).unwrap(), vec![2, 2, 1, 0, 2]);
        assert_eq!(decode_label(0, 5).unwrap(), vec![0; 5]);
        assert_eq!(ket(&[2, 2, 1, 0, 2]), "|22102⟩");
    }

    #[test]
    fn exhaustive_five_qubit_roundtrip() {
        for x in 0..243 {
            let d = decode_label(x, 5).unwrap();
            assert_eq!(encode_label(&d).unwrap(), x);
            for (q, &digit) in d.iter().enumerate() {
                assert_eq!(digit_of(x, q, 5), digit);
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(encode_label(&[0, 3]), Err(Error::InvalidDigit { digit: 3, position: 1 })));
        assert!(matches!(decode_label(243, 5), Err(Error::LabelOutOfRange { .. })));
        assert!(one_hot(3, 3).is_err());
    }

    #[test]
    fn one_hot_vectors() {
        assert_eq!(one_hot(0, 3).unwrap(), vec![1.0, 0.0, 0.0]);
        let v = one_hot(242, 243).unwrap();
        assert_eq!(v[242], 1.0);
        assert_eq!(v.iter().sum::<f64>(), 1.0);
    }

    proptest! {
        #[test]
        fn bijection_up_to_eight_qubits(n in 1usize..=8, seed in any::<u64>()) {
            let x = (seed % num_states(n) as u64) as usize;
            let d = decode_label(x, n).unwrap();
            prop_assert_eq!(d.len(), n);
            prop_assert_eq!(encode_label(&d).unwrap(), x);
        }
    }
}
