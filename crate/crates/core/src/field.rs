//! Arithmetic in the prime field `Z/pZ`.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("{0} is not a prime in [2, 2^31)")]
    NotPrime(u64),
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
}

/// A prime field `Z/pZ`. Elements are plain `u32` residues in `[0, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Field {
    p: u32,
}

impl Default for Field {
    fn default() -> Self {
        Field { p: 2 }
    }
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

impl Field {
    pub fn new(p: u64) -> Result<Self, FieldError> {
        if p >= (1u64 << 31) || !is_prime(p) {
            return Err(FieldError::NotPrime(p));
        }
        Ok(Field { p: p as u32 })
    }

    pub fn characteristic(&self) -> u32 {
        self.p
    }

    /// Reduces a signed integer (e.g. an integral incidence) into the field.
    pub fn from_i64(&self, v: i64) -> u32 {
        v.rem_euclid(self.p as i64) as u32
    }

    /// Symmetric representative in `(-p/2, p/2]`, used when writing
    /// coefficients back out as integers.
    pub fn to_i64(&self, a: u32) -> i64 {
        let a = a as i64;
        let p = self.p as i64;
        if a > p / 2 {
            a - p
        } else {
            a
        }
    }

    #[inline]
    pub fn add(&self, a: u32, b: u32) -> u32 {
        ((a as u64 + b as u64) % self.p as u64) as u32
    }

    #[inline]
    pub fn sub(&self, a: u32, b: u32) -> u32 {
        ((a as u64 + self.p as u64 - b as u64) % self.p as u64) as u32
    }

    #[inline]
    pub fn neg(&self, a: u32) -> u32 {
        if a == 0 {
            0
        } else {
            self.p - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        ((a as u64 * b as u64) % self.p as u64) as u32
    }

    pub fn pow(&self, mut base: u32, mut exp: u64) -> u32 {
        let mut acc = 1u32 % self.p;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via Fermat's little theorem.
    pub fn inv(&self, a: u32) -> Result<u32, FieldError> {
        let a = a % self.p;
        if a == 0 {
            return Err(FieldError::ZeroInverse);
        }
        Ok(self.pow(a, self.p as u64 - 2))
    }

    /// `a / b`; panics on `b == 0`. Callers only divide by stored (nonzero)
    /// coefficients.
    #[inline]
    pub fn div(&self, a: u32, b: u32) -> u32 {
        self.mul(a, self.inv(b).expect("division by zero coefficient"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverses_of_small_examples() {
        assert_eq!(Field::new(7).unwrap().inv(1).unwrap(), 1);
        assert_eq!(Field::new(5).unwrap().inv(2).unwrap(), 3);
        assert_eq!(Field::new(7).unwrap().inv(4).unwrap(), 2);
    }

    #[test]
    fn zero_has_no_inverse() {
        assert_eq!(Field::new(7).unwrap().inv(0), Err(FieldError::ZeroInverse));
    }

    #[test]
    fn rejects_composites_and_out_of_range() {
        assert!(Field::new(4).is_err());
        assert!(Field::new(1).is_err());
        assert!(Field::new(1u64 << 31).is_err());
        assert!(Field::new(2147483647).is_ok());
    }

    #[test]
    fn every_nonzero_element_is_invertible() {
        for p in [2u64, 3, 5, 7, 13, 101] {
            let f = Field::new(p).unwrap();
            for a in 1..p as u32 {
                assert_eq!(f.mul(a, f.inv(a).unwrap()), 1);
            }
        }
    }

    #[test]
    fn signed_reduction_round_trips() {
        let f = Field::new(5).unwrap();
        assert_eq!(f.from_i64(-1), 4);
        assert_eq!(f.to_i64(4), -1);
        assert_eq!(f.to_i64(2), 2);
    }
}
