//! Word-sized modular arithmetic used by every ring in the crate.

#[inline]
pub fn mulmod(a: u64, b: u64, q: u64) -> u64 {
    ((a as u128 * b as u128) % q as u128) as u64
}

#[inline]
pub fn addmod(a: u64, b: u64, q: u64) -> u64 {
    let s = a as u128 + b as u128;
    (s % q as u128) as u64
}

#[inline]
pub fn submod(a: u64, b: u64, q: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        q - (b - a)
    }
}

#[inline]
pub fn negmod(a: u64, q: u64) -> u64 {
    if a == 0 {
        0
    } else {
        q - a
    }
}

/// Reduces a signed integer into `[0, q)`.
#[inline]
pub fn reduce_i64(c: i64, q: u64) -> u64 {
    (c as i128).rem_euclid(q as i128) as u64
}

pub fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn powmod(mut a: u64, mut e: u64, q: u64) -> u64 {
    let mut r = 1 % q;
    a %= q;
    while e > 0 {
        if e & 1 == 1 {
            r = mulmod(r, a, q);
        }
        a = mulmod(a, a, q);
        e >>= 1;
    }
    r
}

/// Inverse of `a` modulo `q`, if `gcd(a, q) = 1`.
pub fn inv_mod(a: u64, q: u64) -> Option<u64> {
    let (mut r0, mut r1) = (q as i128, (a % q) as i128);
    let (mut s0, mut s1) = (0i128, 1i128);
    while r1 != 0 {
        let t = r0 / r1;
        (r0, r1) = (r1, r0 - t * r1);
        (s0, s1) = (s1, s0 - t * s1);
    }
    if r0 != 1 {
        return None;
    }
    Some(s0.rem_euclid(q as i128) as u64)
}

/// p-adic valuation of a nonzero integer.
pub fn vp(mut x: u64, p: u64) -> u32 {
    debug_assert!(x != 0);
    let mut v = 0;
    while x % p == 0 {
        x /= p;
        v += 1;
    }
    v
}

/// Valuation of a residue modulo `p^m`, with `m` returned for zero.
pub fn vp_capped(x: u64, p: u64, m: u32) -> u32 {
    if x == 0 {
        m
    } else {
        vp(x, p).min(m)
    }
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Prime factors of `n` in increasing order, without multiplicity.
pub fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            out.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Smallest primitive root modulo the prime `l`.
pub fn primitive_root(l: u64) -> u64 {
    if l == 2 {
        return 1;
    }
    let fs = prime_factors(l - 1);
    (2..l)
        .find(|&g| fs.iter().all(|&f| powmod(g, (l - 1) / f, l) != 1))
        .expect("prime modulus has a primitive root")
}

/// `p^e`, or `None` on overflow past 2^62.
pub fn checked_pow(p: u64, e: u32) -> Option<u64> {
    let mut r: u64 = 1;
    for _ in 0..e {
        r = r.checked_mul(p)?;
        if r > (1u64 << 62) {
            return None;
        }
    }
    Some(r)
}

/// Largest `k` with `p^k <= x` (for `x >= 1`).
pub fn ilog(p: u64, x: u64) -> u32 {
    let mut k = 0;
    let mut v = p;
    while v <= x {
        k += 1;
        v = match v.checked_mul(p) {
            Some(v) => v,
            None => break,
        };
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_and_powers() {
        assert_eq!(inv_mod(3, 125), Some(42));
        assert_eq!(inv_mod(5, 125), None);
        assert_eq!(powmod(6, 5, 125), 6u64.pow(5) % 125);
        assert_eq!(primitive_root(11), 2);
        assert_eq!(primitive_root(31), 3);
        assert_eq!(prime_factors(60), vec![2, 3, 5]);
        assert_eq!(vp(250, 5), 3);
        assert_eq!(ilog(5, 124), 2);
        assert_eq!(ilog(5, 125), 3);
    }
}
