//! Arithmetic in Z/p^M with a 64-bit modulus.
//!
//! Odd moduli use Montgomery form internally. Multiplying by the Montgomery
//! constant is multiplication by a unit, so p-adic valuations and exact
//! divisions by powers of p commute with the representation.

use crate::error::{ForgeError, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModPow {
    p: u64,
    m: u32,
    n: u64,
    ninv: u64,
    r2: u64,
    odd: bool,
    pows: Vec<u64>,
}

impl ModPow {
    pub fn new(p: u64, m: u32) -> Result<Self> {
        if p < 2 {
            return Err(ForgeError::InvalidConfig(format!("p = {p} is not a prime")));
        }
        if m == 0 {
            return Err(ForgeError::InvalidConfig("M must be positive".into()));
        }
        let mut pows = vec![1u64];
        for _ in 0..m {
            let next = pows.last().unwrap().checked_mul(p).ok_or_else(|| {
                ForgeError::InvalidConfig(format!("p^M = {p}^{m} does not fit in 64 bits"))
            })?;
            pows.push(next);
        }
        let n = pows[m as usize];
        let odd = p % 2 == 1;
        if !odd && m > 63 {
            return Err(ForgeError::InvalidConfig("2^M must be below 2^64".into()));
        }
        let (ninv, r2) = if odd {
            // Newton iteration for n^{-1} mod 2^64.
            let mut inv: u64 = 1;
            for _ in 0..7 {
                inv = inv.wrapping_mul(2u64.wrapping_sub(n.wrapping_mul(inv)));
            }
            let r = ((1u128 << 64) % n as u128) as u64;
            let r2 = ((r as u128 * r as u128) % n as u128) as u64;
            (inv.wrapping_neg(), r2)
        } else {
            (0, 0)
        };
        Ok(ModPow { p, m, n, ninv, r2, odd, pows })
    }

    #[inline]
    pub fn p(&self) -> u64 {
        self.p
    }
    #[inline]
    pub fn exp(&self) -> u32 {
        self.m
    }
    #[inline]
    pub fn modulus(&self) -> u64 {
        self.n
    }
    pub fn pow_p(&self, k: u32) -> u64 {
        self.pows[k as usize]
    }

    #[inline]
    fn redc(&self, t: u128) -> u64 {
        let m = (t as u64).wrapping_mul(self.ninv);
        let (s, carry) = t.overflowing_add(m as u128 * self.n as u128);
        let r = (s >> 64) as u64;
        if carry || r >= self.n {
            r.wrapping_sub(self.n)
        } else {
            r
        }
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let (s, c) = a.overflowing_add(b);
        if c || s >= self.n {
            s.wrapping_sub(self.n)
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            self.n - (b - a)
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.n - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        if self.odd {
            self.redc(a as u128 * b as u128)
        } else {
            a.wrapping_mul(b) & (self.n - 1)
        }
    }

    /// Internal representation of the integer `x mod p^M`.
    pub fn from_u64(&self, x: u64) -> u64 {
        let x = x % self.n;
        if self.odd {
            self.redc(x as u128 * self.r2 as u128)
        } else {
            x
        }
    }

    pub fn from_i64(&self, x: i64) -> u64 {
        let r = self.from_u64(x.unsigned_abs());
        if x < 0 {
            self.neg(r)
        } else {
            r
        }
    }

    /// Canonical integer in `[0, p^M)` for an internal representative.
    pub fn to_u64(&self, a: u64) -> u64 {
        if self.odd {
            self.redc(a as u128)
        } else {
            a
        }
    }

    /// Signed representative in `(-p^M/2, p^M/2]`.
    pub fn to_i128(&self, a: u64) -> i128 {
        let v = self.to_u64(a);
        if v > self.n / 2 {
            v as i128 - self.n as i128
        } else {
            v as i128
        }
    }

    /// p-adic valuation of the represented value, capped at M.
    #[inline]
    pub fn val(&self, a: u64) -> u32 {
        if a == 0 {
            return self.m;
        }
        let mut k = 0;
        let mut x = a;
        while x.is_multiple_of(self.p) {
            x /= self.p;
            k += 1;
        }
        k
    }

    /// Exact division of the representative by `p^k`; the top `k` digits of
    /// the result are not determined by the input.
    #[inline]
    pub fn div_p_pow(&self, a: u64, k: u32) -> u64 {
        a / self.pows[k as usize]
    }

    pub fn pow(&self, a: u64, mut e: u64) -> u64 {
        let mut base = a;
        let mut acc = self.from_u64(1);
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn montgomery_round_trip_near_word_size() {
        let z = ModPow::new(3, 40).unwrap();
        let n = z.modulus();
        for x in [0u64, 1, 2, 3, n - 1, n / 2, 123456789] {
            assert_eq!(z.to_u64(z.from_u64(x)), x);
        }
        let a = z.from_u64(n - 1);
        assert_eq!(z.to_u64(z.mul(a, a)), 1);
    }

    #[test]
    fn valuation_survives_montgomery_form() {
        let z = ModPow::new(3, 20).unwrap();
        let x = z.from_u64(81 * 5);
        assert_eq!(z.val(x), 4);
        let y = z.div_p_pow(x, 4);
        assert_eq!(z.to_u64(y) % z.pow_p(16), 5);
    }

    #[test]
    fn power_of_two_modulus() {
        let z = ModPow::new(2, 10).unwrap();
        let a = z.from_i64(-3);
        assert_eq!(z.to_u64(a), 1021);
        assert_eq!(z.to_u64(z.mul(a, a)), 9);
        assert_eq!(z.val(z.from_u64(48)), 4);
    }

    #[test]
    fn rejects_oversized_modulus() {
        assert!(ModPow::new(3, 41).is_err());
        assert!(ModPow::new(3, 40).is_ok());
    }
}
