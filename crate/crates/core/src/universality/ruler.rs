//! The ruler sequence `ℓ(k)` and its partial sums `r_k`, which schedule how
//! often each target is revisited.

/// `ℓ(k) = s + 1` where `2^s` is the largest power of two dividing `k`.
pub fn ruler_ell(k: u64) -> u32 {
    assert!(k >= 1, "ruler sequence starts at k = 1");
    k.trailing_zeros() + 1
}

/// `r_k = r_{k−1} + ℓ(k)` with `r_0 = 0`.
pub fn ruler_r(k: u64) -> u64 {
    (1..=k).map(|j| u64::from(ruler_ell(j))).sum()
}

/// `r_1, …, r_k` in one pass.
pub fn ruler_prefix(k: u64) -> Vec<u64> {
    let mut out = Vec::with_capacity(k as usize);
    let mut r = 0;
    for j in 1..=k {
        r += u64::from(ruler_ell(j));
        out.push(r);
    }
    out
}

/// `|{k ≤ 2^N : ℓ(k) = m}|`: multiples of `2^{m−1}` minus multiples of `2^m`.
pub fn ruler_count(n: u32, m: u32) -> u64 {
    assert!(m >= 1, "ℓ takes values from 1");
    if m > n + 1 {
        return 0;
    }
    let top = 1u64 << n;
    (top >> (m - 1)) - (top >> m)
}
