//! Seeded argument-vector generation for the differential oracle.

use crate::ir::{ConstInt, FuncSig, IrType};
use crate::rng::SplitMix64;

/// Pointer parameters get a fresh buffer of this many bytes per run.
pub const BUFFER_LEN: usize = 16;

/// One generated argument.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArgValue {
    Int(ConstInt),
    /// Materialized as a fresh allocation; the callee receives the pointer.
    Buffer(Vec<u8>),
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum VectorError {
    #[error("cannot generate inputs for parameter type '{0}'")]
    UnsupportedParamType(String),
}

/// Boundary cases exercised before random values: 0, 1, -1, min, max.
const BOUNDARY_COUNT: u64 = 5;

fn boundary_int(width: u32, which: u64) -> ConstInt {
    match which {
        0 => ConstInt::new(width, 0),
        1 => ConstInt::new(width, 1),
        2 => ConstInt::new(width, -1),
        3 => ConstInt::from_bits(width, 1u64 << (width - 1)), // min
        _ => {
            let min = 1u64 << (width - 1);
            ConstInt::from_bits(width, min.wrapping_sub(1)) // max
        }
    }
}

fn boundary_fill(which: u64) -> u8 {
    [0x00, 0x01, 0xff, 0x80, 0x7f][which as usize]
}

/// Generates `n` argument vectors for `sig`, deterministically in
/// `(sig, n, seed)`.
///
/// The first `5 * arity` vectors cycle through the boundary set (vector 0 is
/// all zeros); the rest are SplitMix64-driven. Integer parameters draw masked
/// random bits; pointer parameters draw [`BUFFER_LEN`]-byte buffers.
pub fn gen_vectors(sig: &FuncSig, n: usize, seed: u64) -> Result<Vec<Vec<ArgValue>>, VectorError> {
    for p in &sig.params {
        match p {
            IrType::Int(_) | IrType::Ptr => {}
            other => return Err(VectorError::UnsupportedParamType(other.to_string())),
        }
    }

    let arity = sig.params.len() as u64;
    let boundary_vectors = BOUNDARY_COUNT * arity;
    let mut rng = SplitMix64::new(seed);
    let mut out = Vec::with_capacity(n);
    for v in 0..n as u64 {
        let mut args = Vec::with_capacity(sig.params.len());
        if v < boundary_vectors {
            // Mixed-radix walk over the boundary set: vector 0 is all zeros,
            // later vectors vary one position at a time.
            for (i, p) in sig.params.iter().enumerate() {
                let which = (v as u128 / 5u128.pow(i as u32)) % 5;
                args.push(match p {
                    IrType::Int(w) => ArgValue::Int(boundary_int(*w, which as u64)),
                    IrType::Ptr => ArgValue::Buffer(vec![boundary_fill(which as u64); BUFFER_LEN]),
                    _ => unreachable!("checked above"),
                });
            }
        } else {
            for p in &sig.params {
                args.push(match p {
                    IrType::Int(w) => ArgValue::Int(ConstInt::from_bits(*w, rng.next_u64())),
                    IrType::Ptr => {
                        let mut buf = vec![0u8; BUFFER_LEN];
                        for chunk in buf.chunks_mut(8) {
                            let bytes = rng.next_u64().to_le_bytes();
                            chunk.copy_from_slice(&bytes[..chunk.len()]);
                        }
                        ArgValue::Buffer(buf)
                    }
                    _ => unreachable!("checked above"),
                });
            }
        }
        out.push(args);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn int_sig(widths: &[u32]) -> FuncSig {
        FuncSig {
            ret: IrType::Int(32),
            params: widths.iter().map(|w| IrType::Int(*w)).collect(),
            variadic: false,
        }
    }

    #[test]
    fn first_vector_is_all_zeros() {
        let vs = gen_vectors(&int_sig(&[32, 32]), 2, 99).unwrap();
        assert_eq!(
            vs[0],
            vec![
                ArgValue::Int(ConstInt::new(32, 0)),
                ArgValue::Int(ConstInt::new(32, 0))
            ]
        );
        assert_eq!(
            vs[1],
            vec![
                ArgValue::Int(ConstInt::new(32, 1)),
                ArgValue::Int(ConstInt::new(32, 0))
            ]
        );
    }

    #[test]
    fn determinism() {
        let sig = int_sig(&[32, 8]);
        let a = gen_vectors(&sig, 64, 42).unwrap();
        let b = gen_vectors(&sig, 64, 42).unwrap();
        assert_eq!(a, b);
        let c = gen_vectors(&sig, 64, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn boundary_values_present_for_unary_sig() {
        let vs = gen_vectors(&int_sig(&[32]), 64, 42).unwrap();
        let firsts: Vec<i64> = vs[..5]
            .iter()
            .map(|v| match &v[0] {
                ArgValue::Int(c) => c.value(),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(firsts, vec![0, 1, -1, i32::MIN as i64, i32::MAX as i64]);
    }

    #[test]
    fn pointer_params_are_fixed_len_buffers() {
        let sig = FuncSig {
            ret: IrType::Int(32),
            params: vec![IrType::Ptr, IrType::Int(32)],
            variadic: false,
        };
        let vs = gen_vectors(&sig, 12, 7).unwrap();
        for v in &vs {
            match &v[0] {
                ArgValue::Buffer(b) => assert_eq!(b.len(), BUFFER_LEN),
                _ => panic!("expected buffer"),
            }
        }
    }

    #[test]
    fn unsupported_param_type_rejected() {
        let sig = FuncSig {
            ret: IrType::Void,
            params: vec![IrType::array(4, IrType::Int(8))],
            variadic: false,
        };
        assert!(matches!(
            gen_vectors(&sig, 4, 0),
            Err(VectorError::UnsupportedParamType(_))
        ));
    }

    #[test]
    fn i1_boundaries_stay_in_range() {
        let vs = gen_vectors(&int_sig(&[1]), 10, 3).unwrap();
        for v in vs {
            match &v[0] {
                ArgValue::Int(c) => assert!(c.bits() <= 1),
                _ => unreachable!(),
            }
        }
    }
}
