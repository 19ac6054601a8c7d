//! Driving sequence constructions: the full-period LCG lattice tableau,
//! Cranley-Patterson rotation, row shuffling, within-block permutation
//! and IID insertion.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::discrepancy::{star_discrepancy, PointSet};
use crate::error::{Error, Result};
use crate::seq::{DrivingSequence, Method, Permutation, SeqMeta};

/// Parameters of a full-period lattice tableau.
///
/// `n` is a prime modulus, `a` a primitive root mod `n`, and `m` the
/// number of uniforms one MCMC step consumes. `g = gcd(m, n-1)` and
/// `b = (n-1)/g` describe the block structure of the tableau.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeSpec {
    pub n: u64,
    pub a: u64,
    pub m: usize,
    pub g: u64,
    pub b: u64,
}

impl LatticeSpec {
    pub fn new(n: u64, a: u64, m: usize) -> Result<Self> {
        if !is_prime(n) {
            return Err(Error::domain(format!("modulus {n} is not prime")));
        }
        if m == 0 {
            return Err(Error::domain("tuple width m must be positive"));
        }
        if !(1 < a && a < n) {
            return Err(Error::domain(format!("multiplier {a} not in (1, {n})")));
        }
        if !is_primitive_root(a, n)? {
            return Err(Error::domain(format!(
                "{a} is not a primitive root modulo {n}"
            )));
        }
        let g = gcd(m as u64, n - 1);
        Ok(LatticeSpec {
            n,
            a,
            m,
            g,
            b: (n - 1) / g,
        })
    }
}

/// The five moduli and multipliers of the probit study, from L'Ecuyer's
/// tables of LCGs with good lattice structure.
pub const STUDY_LATTICES: [(u64, u64); 5] =
    [(1021, 65), (2039, 393), (4093, 235), (8191, 884), (16381, 665)];

/// Look up the tabulated multiplier for `n`, if any.
pub fn tabulated_multiplier(n: u64) -> Option<u64> {
    STUDY_LATTICES
        .iter()
        .find(|&&(nn, _)| nn == n)
        .map(|&(_, a)| a)
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Euler's totient: the count of k in 1..=n with gcd(k, n) = 1.
pub fn totient(n: u64) -> Result<u64> {
    if n == 0 {
        return Err(Error::domain("totient undefined at 0"));
    }
    let mut result = n;
    for (p, _) in factorize(n) {
        result -= result / p;
    }
    Ok(result)
}

/// Prime factorization by trial division, as (prime, exponent) pairs.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut p = 3u64;
    while p * p <= n {
        if n % p == 0 {
            return false;
        }
        p += 2;
    }
    true
}

#[inline]
fn mul_mod(a: u64, b: u64, n: u64) -> u64 {
    ((a as u128 * b as u128) % n as u128) as u64
}

pub fn pow_mod(mut base: u64, mut exp: u64, n: u64) -> u64 {
    let mut acc = 1u64 % n;
    base %= n;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, n);
        }
        base = mul_mod(base, base, n);
        exp >>= 1;
    }
    acc
}

/// True iff the multiplicative order of `a` modulo the prime `n` is
/// `n - 1`, checked via `a^((n-1)/q) != 1` for each prime `q | n-1`.
pub fn is_primitive_root(a: u64, n: u64) -> Result<bool> {
    if !is_prime(n) {
        return Err(Error::domain(format!("{n} is not prime")));
    }
    let a = a % n;
    if a == 0 {
        return Ok(false);
    }
    for (q, _) in factorize(n - 1) {
        if pow_mod(a, (n - 1) / q, n) == 1 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// All primitive roots modulo the prime `n`, in increasing order.
pub fn primitive_roots(n: u64) -> Result<Vec<u64>> {
    if !is_prime(n) {
        return Err(Error::domain(format!("{n} is not prime")));
    }
    let mut roots = Vec::new();
    for a in 2..n {
        if is_primitive_root(a, n)? {
            roots.push(a);
        }
    }
    Ok(roots)
}

/// Build the N x m lattice tableau: a zero row followed by all N-1
/// overlapping m-tuples of the LCG orbit `x -> a x mod N`, scanned
/// row-major. When `g = gcd(m, N-1) > 1` the plain layout repeats the
/// same b rows g times; the k'th block of b rows is multiplied by
/// `a^(k-1) mod N` so the tableau covers each m-tuple exactly once.
pub fn lattice_tableau(spec: &LatticeSpec) -> Vec<Vec<f64>> {
    let n = spec.n;
    let m = spec.m;
    let scale = 1.0 / n as f64;
    let mut rows = Vec::with_capacity(n as usize);
    rows.push(vec![0.0; m]);
    // x walks the orbit; entry (r, c) of the raw layout is a^((r-1)m + c)
    let mut x = 1u64;
    let mut row_in_block = 0u64;
    let mut block_mult = 1u64;
    for _ in 1..n {
        let mut row = Vec::with_capacity(m);
        let mut y = x;
        for _ in 0..m {
            row.push(mul_mod(y, block_mult, n) as f64 * scale);
            y = mul_mod(y, spec.a, n);
        }
        x = y;
        rows.push(row);
        row_in_block += 1;
        if row_in_block == spec.b {
            // next block of b rows restarts the orbit, rescaled by a
            row_in_block = 0;
            block_mult = mul_mod(block_mult, spec.a, n);
            x = 1;
        }
    }
    rows
}

/// Flatten a tableau into a driving sequence.
pub fn tableau_sequence(spec: &LatticeSpec) -> DrivingSequence {
    let values: Vec<f64> = lattice_tableau(spec).into_iter().flatten().collect();
    DrivingSequence::new(
        values,
        Method::Lcg,
        SeqMeta {
            n: Some(spec.n),
            m: Some(spec.m),
            seed: None,
        },
    )
    .expect("tableau entries are k/N in [0,1)")
}

/// Cranley-Patterson rotation: `v_i = u_i + U_{j(i)} mod 1` with
/// `j(i) = 1 + ((i-1) mod m)`.
pub fn cp_rotate(u: &DrivingSequence, rotation: &[f64], m: usize) -> Result<DrivingSequence> {
    if m == 0 {
        return Err(Error::domain("rotation period m must be positive"));
    }
    if rotation.len() != m {
        return Err(Error::domain(format!(
            "rotation vector has length {}, expected m = {m}",
            rotation.len()
        )));
    }
    let values = u
        .values()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let mut w = v + rotation[i % m];
            if w >= 1.0 {
                w -= 1.0;
            }
            // guard against w + U rounding up to exactly 1.0
            if w >= 1.0 {
                w = 0.0;
            }
            w
        })
        .collect();
    DrivingSequence::new(
        values,
        Method::LcgCp,
        SeqMeta {
            m: Some(m),
            ..u.meta.clone()
        },
    )
}

/// Concatenate the rows of `points` in the order given by `tau`.
pub fn liao_shuffle(points: &PointSet, tau: &Permutation) -> Result<DrivingSequence> {
    if tau.len() != points.len() {
        return Err(Error::domain(format!(
            "permutation on {} indices does not match {} rows",
            tau.len(),
            points.len()
        )));
    }
    let mut values = Vec::with_capacity(points.len() * points.dim());
    for i in 0..points.len() {
        values.extend_from_slice(points.point(tau.apply(i)));
    }
    DrivingSequence::new(values, Method::Liao, SeqMeta::default())
}

/// Apply a fixed permutation `sigma` of offsets {0..r-1} within each
/// consecutive block of `r` values; a trailing partial block is passed
/// through unchanged.
pub fn block_permute(
    u: &DrivingSequence,
    r: usize,
    sigma: &Permutation,
) -> Result<DrivingSequence> {
    if r == 0 {
        return Err(Error::domain("block length r must be positive"));
    }
    if sigma.len() != r {
        return Err(Error::domain(format!(
            "sigma acts on {} offsets, expected r = {r}",
            sigma.len()
        )));
    }
    let vals = u.values();
    let full = vals.len() / r * r;
    let mut out = Vec::with_capacity(vals.len());
    for block in 0..vals.len() / r {
        for offset in 0..r {
            out.push(vals[block * r + sigma.apply(offset)]);
        }
    }
    out.extend_from_slice(&vals[full..]);
    DrivingSequence::new(out, Method::BlockPerm, u.meta.clone())
}

/// Splice an IID stream into `v`: each block of `m` consecutive values
/// of `v` becomes a block of `m + 1` with one IID value inserted at
/// offset `p`; block k consumes the k'th IID draw. Output length is
/// `(m + 1) * floor(len(v) / m)`.
pub fn insert_iid(
    v: &DrivingSequence,
    m: usize,
    p: usize,
    iid: &mut impl Rng,
) -> Result<DrivingSequence> {
    if m == 0 {
        return Err(Error::domain("block size m must be positive"));
    }
    if p > m {
        return Err(Error::domain(format!("insert offset {p} exceeds m = {m}")));
    }
    let vals = v.values();
    let blocks = vals.len() / m;
    let mut out = Vec::with_capacity(blocks * (m + 1));
    for k in 0..blocks {
        let w: f64 = iid.gen();
        let block = &vals[k * m..(k + 1) * m];
        out.extend_from_slice(&block[..p]);
        out.push(w);
        out.extend_from_slice(&block[p..]);
    }
    DrivingSequence::new(out, Method::IidInsert, v.meta.clone())
}

/// Uniformly random permutation on n indices (Fisher-Yates).
pub fn random_permutation(n: usize, rng: &mut impl Rng) -> Result<Permutation> {
    if n == 0 {
        return Err(Error::domain("permutation on zero elements"));
    }
    let mut map: Vec<usize> = (0..n).collect();
    map.shuffle(rng);
    Permutation::new(map)
}

/// Exact 2-dimensional star discrepancy of the N-1 overlapping pairs of
/// the LCG orbit with multiplier `a`.
pub fn lattice_pair_discrepancy(n: u64, a: u64, budget: u128) -> Result<f64> {
    let scale = 1.0 / n as f64;
    let mut orbit = Vec::with_capacity(n as usize);
    let mut x = 1u64;
    for _ in 0..n {
        orbit.push(x as f64 * scale);
        x = mul_mod(x, a, n);
    }
    // orbit has period n-1; orbit[n-1] == orbit[0]
    let pairs: Vec<[f64; 2]> = (0..(n - 1) as usize)
        .map(|i| [orbit[i], orbit[i + 1]])
        .collect();
    let flat: Vec<f64> = pairs.iter().flatten().copied().collect();
    let points = PointSet::from_flat(flat, 2)?;
    star_discrepancy(&points, budget)
}

/// Choose the primitive root with the smallest exact 2-dimensional star
/// discrepancy of overlapping pairs; used when no tabulated multiplier
/// applies.
pub fn search_multiplier(n: u64, budget: u128) -> Result<u64> {
    if let Some(a) = tabulated_multiplier(n) {
        return Ok(a);
    }
    let mut best: Option<(f64, u64)> = None;
    for a in primitive_roots(n)? {
        let d = lattice_pair_discrepancy(n, a, budget)?;
        if best.map_or(true, |(bd, _)| d < bd) {
            best = Some((d, a));
        }
    }
    best.map(|(_, a)| a)
        .ok_or_else(|| Error::domain(format!("no primitive root found for {n}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamFactory;

    // independent brute-force oracle for the totient
    fn totient_brute(n: u64) -> u64 {
        (1..=n).filter(|&k| gcd(k, n) == 1).count() as u64
    }

    #[test]
    fn totient_values() {
        assert_eq!(totient(1).unwrap(), 1);
        assert_eq!(totient(7).unwrap(), 6);
        assert_eq!(totient(1020).unwrap(), 256);
        assert_eq!(totient(1020).unwrap(), totient_brute(1020));
        for n in 1..200 {
            assert_eq!(totient(n).unwrap(), totient_brute(n), "n = {n}");
        }
        assert!(totient(0).is_err());
    }

    #[test]
    fn primitive_root_checks() {
        assert!(is_primitive_root(3, 7).unwrap());
        assert!(!is_primitive_root(2, 7).unwrap());
        assert!(is_primitive_root(65, 1021).unwrap());
        assert!(is_primitive_root(2, 5).is_ok());
        assert!(is_primitive_root(2, 6).is_err());
    }

    #[test]
    fn study_multipliers_are_primitive_roots() {
        for &(n, a) in &STUDY_LATTICES {
            assert!(is_primitive_root(a, n).unwrap(), "a={a} N={n}");
        }
    }

    #[test]
    fn study_block_structure_matches_tabulated_values() {
        let expect = [(1021u64, 6u64, 170u64), (2039, 2, 1019), (4093, 6, 682), (8191, 42, 195), (16381, 42, 390)];
        for &(n, g, b) in &expect {
            let a = tabulated_multiplier(n).unwrap();
            let spec = LatticeSpec::new(n, a, 42).unwrap();
            assert_eq!((spec.g, spec.b), (g, b), "N = {n}");
        }
    }

    #[test]
    fn small_tableau_enumerates_all_pairs() {
        let spec = LatticeSpec::new(7, 3, 2).unwrap();
        let rows = lattice_tableau(&spec);
        assert_eq!(spec.g, 2);
        assert_eq!(spec.b, 3);
        assert_eq!(rows[0], vec![0.0, 0.0]);
        let got: Vec<(u64, u64)> = rows[1..]
            .iter()
            .map(|r| ((r[0] * 7.0).round() as u64, (r[1] * 7.0).round() as u64))
            .collect();
        assert_eq!(got, vec![(1, 3), (2, 6), (4, 5), (3, 2), (6, 4), (5, 1)]);
    }

    #[test]
    fn tableau_rows_cover_orbit_windows_exactly_once() {
        // brute-force enumeration of all overlapping m-tuples of the orbit
        for &(n, a, m) in &[(11u64, 2u64, 3usize), (13, 2, 4), (31, 3, 5), (97, 5, 6)] {
            let spec = LatticeSpec::new(n, a, m).unwrap();
            let rows = lattice_tableau(&spec);
            let mut got: Vec<Vec<u64>> = rows[1..]
                .iter()
                .map(|r| r.iter().map(|&v| (v * n as f64).round() as u64).collect())
                .collect();
            let mut orbit = Vec::new();
            let mut x = 1u64;
            for _ in 0..(n - 1) {
                orbit.push(x);
                x = mul_mod(x, a, n);
            }
            let mut expect: Vec<Vec<u64>> = (0..orbit.len())
                .map(|s| (0..m).map(|j| orbit[(s + j) % orbit.len()]).collect())
                .collect();
            got.sort();
            expect.sort();
            assert_eq!(got, expect, "N={n} a={a} m={m}");
        }
    }

    #[test]
    fn cp_rotate_formula() {
        let u = DrivingSequence::new(vec![0.1, 0.2, 0.3, 0.4], Method::Iid, SeqMeta::default())
            .unwrap();
        let v = cp_rotate(&u, &[0.5, 0.9], 2).unwrap();
        let expect = [0.6, 0.1, 0.8, 0.3];
        for (got, want) in v.values().iter().zip(expect) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn cp_rotate_identity_and_wraparound() {
        let u = DrivingSequence::new(vec![0.7], Method::Iid, SeqMeta::default()).unwrap();
        let id = cp_rotate(&u, &[0.0], 1).unwrap();
        assert_eq!(id.values(), u.values());
        let w = cp_rotate(&u, &[0.6], 1).unwrap();
        assert!((w.values()[0] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn cp_rotate_inverts_with_negated_vector() {
        let f = StreamFactory::new(5);
        let vals = crate::rng::draw_units(&mut f.stream("u", 0), 64);
        let u = DrivingSequence::new(vals, Method::Iid, SeqMeta::default()).unwrap();
        let rot = [0.3, 0.77, 0.123];
        let inv: Vec<f64> = rot.iter().map(|r| (1.0 - r) % 1.0).collect();
        let v = cp_rotate(&u, &rot, 3).unwrap();
        let back = cp_rotate(&v, &inv, 3).unwrap();
        for (a, b) in u.values().iter().zip(back.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn liao_shuffle_orders_rows() {
        let points = PointSet::from_flat(vec![0.1, 0.2, 0.3, 0.4], 2).unwrap();
        let id = liao_shuffle(&points, &Permutation::identity(2)).unwrap();
        assert_eq!(id.values(), &[0.1, 0.2, 0.3, 0.4]);
        let swap = liao_shuffle(&points, &Permutation::new(vec![1, 0]).unwrap()).unwrap();
        assert_eq!(swap.values(), &[0.3, 0.4, 0.1, 0.2]);
        assert!(liao_shuffle(&points, &Permutation::identity(3)).is_err());
    }

    #[test]
    fn block_permute_examples() {
        let u = DrivingSequence::new(vec![0.1, 0.2, 0.3, 0.4], Method::Iid, SeqMeta::default())
            .unwrap();
        let id = block_permute(&u, 2, &Permutation::identity(2)).unwrap();
        assert_eq!(id.values(), u.values());
        let swapped = block_permute(&u, 2, &Permutation::new(vec![1, 0]).unwrap()).unwrap();
        assert_eq!(swapped.values(), &[0.2, 0.1, 0.4, 0.3]);
    }

    #[test]
    fn block_permute_inverse_composition() {
        let f = StreamFactory::new(9);
        let mut rng = f.stream("bp", 0);
        let vals = crate::rng::draw_units(&mut rng, 23); // trailing remainder of 3
        let u = DrivingSequence::new(vals, Method::Iid, SeqMeta::default()).unwrap();
        let sigma = random_permutation(5, &mut rng).unwrap();
        let once = block_permute(&u, 5, &sigma).unwrap();
        let back = block_permute(&once, 5, &sigma.inverse()).unwrap();
        assert_eq!(back.values(), u.values());
    }

    #[test]
    fn insert_iid_structure() {
        let v = DrivingSequence::new(vec![0.1, 0.2, 0.3, 0.4], Method::Iid, SeqMeta::default())
            .unwrap();
        let f = StreamFactory::new(3);
        let mut rng = f.stream("w", 0);
        let w1: f64 = {
            let mut r = f.stream("w", 0);
            rand::Rng::gen(&mut r)
        };
        let out = insert_iid(&v, 2, 2, &mut rng).unwrap();
        assert_eq!(out.len(), 6);
        assert_eq!(&out.values()[..2], &[0.1, 0.2]);
        assert_eq!(out.values()[2], w1);
        assert_eq!(&out.values()[3..5], &[0.3, 0.4]);
        assert!(insert_iid(&v, 2, 3, &mut rng).is_err());
    }

    #[test]
    fn insert_iid_deletion_recovers_input() {
        let f = StreamFactory::new(11);
        let vals = crate::rng::draw_units(&mut f.stream("v", 0), 25);
        let v = DrivingSequence::new(vals, Method::Iid, SeqMeta::default()).unwrap();
        for p in 0..=3usize {
            let out = insert_iid(&v, 3, p, &mut f.stream("w", p as u64)).unwrap();
            assert_eq!(out.len(), 4 * (25 / 3));
            let kept: Vec<f64> = out
                .values()
                .iter()
                .enumerate()
                .filter(|(i, _)| i % 4 != p)
                .map(|(_, &x)| x)
                .collect();
            assert_eq!(&kept[..], &v.values()[..24]);
        }
    }

    #[test]
    fn random_permutation_is_deterministic_and_uniform() {
        let f = StreamFactory::new(21);
        let p1 = random_permutation(8, &mut f.stream("tau", 0)).unwrap();
        let p2 = random_permutation(8, &mut f.stream("tau", 0)).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(random_permutation(1, &mut f.stream("tau", 1)).unwrap().as_slice(), &[0]);
        assert!(random_permutation(0, &mut f.stream("tau", 2)).is_err());

        // chi-square style check: 60k draws of S_3, each cell within 3 sigma
        let mut counts = std::collections::HashMap::new();
        let mut rng = f.stream("tau", 3);
        let draws = 60_000;
        for _ in 0..draws {
            let p = random_permutation(3, &mut rng).unwrap();
            *counts.entry(p.as_slice().to_vec()).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 6);
        let expect = draws as f64 / 6.0;
        let sigma = (draws as f64 * (1.0 / 6.0) * (5.0 / 6.0)).sqrt();
        for (perm, c) in counts {
            assert!(
                (c as f64 - expect).abs() < 3.0 * sigma,
                "{perm:?} occurred {c} times"
            );
        }
    }
}
