//! Dense control mathematics: matrix exponential, continuous algebraic Riccati
//! equation and spectral stability diagnostics.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};

// Padé coefficients and 1-norm thresholds (Higham 2005).
const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.53939833006323e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA13: f64 = 5.371920351148152;

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn ensure_square(m: &DMatrix<f64>, what: &'static str) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: format!("square {what}"),
            actual: format!("{}×{}", m.nrows(), m.ncols()),
        });
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(what));
    }
    Ok(m.nrows())
}

/// `e^M` by scaling and squaring with a diagonal Padé approximant.
pub fn expm(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = ensure_square(m, "matrix exponential argument")?;
    let ident = DMatrix::<f64>::identity(n, n);
    if n == 0 {
        return Ok(ident);
    }
    let a_norm = norm1(m);
    if a_norm == 0.0 {
        return Ok(ident);
    }

    for &(degree, theta) in &THETA {
        if a_norm <= theta {
            let coeffs: &[f64] = match degree {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            let (u, v) = pade_low(m, coeffs, &ident);
            return pade_solve(&u, &v);
        }
    }

    let s = (a_norm / THETA13).log2().ceil().max(0.0) as i32;
    let scaled = m / 2f64.powi(s);
    let (u, v) = pade13(&scaled, &ident);
    let mut r = pade_solve(&u, &v)?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

fn pade_low(a: &DMatrix<f64>, b: &[f64], ident: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let a2 = a * a;
    let mut odd = ident * b[1];
    let mut even = ident * b[0];
    let mut power = ident.clone();
    for k in 1..b.len() / 2 {
        power = &power * &a2;
        odd += &power * b[2 * k + 1];
        even += &power * b[2 * k];
    }
    (a * odd, even)
}

fn pade13(a: &DMatrix<f64>, ident: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let b = &PADE13;
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
    let u = a * (inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + ident * b[1]);
    let inner_v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]);
    let v = inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + ident * b[0];
    (u, v)
}

fn pade_solve(u: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = v + u;
    let q = v - u;
    q.lu()
        .solve(&p)
        .ok_or_else(|| Error::NoStabilizingSolution("singular Padé denominator".into()))
}

const QR_MAX_ITER: usize = 60;

/// Eigenvalues of a general real square matrix.
///
/// Balancing, Householder reduction to Hessenberg form and Francis
/// double-shift QR with exceptional shifts. Unlike an uncapped Schur
/// iteration this always terminates, reporting [`Error::NotConverged`] when a
/// block refuses to deflate.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    let n = ensure_square(m, "eigenvalue argument")?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut a = m.clone();
    balance(&mut a);
    let mut h = a.hessenberg().h();
    hessenberg_qr(&mut h)
}

fn balance(a: &mut DMatrix<f64>) {
    const RADIX: f64 = 2.0;
    let n = a.nrows();
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= RADIX * RADIX;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= RADIX * RADIX;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                for j in 0..n {
                    a[(i, j)] /= f;
                    a[(j, i)] *= f;
                }
            }
        }
    }
}

/// Eigenvalues of an upper Hessenberg matrix, destroying it.
fn hessenberg_qr(a: &mut DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    let n = a.nrows();
    let eps = f64::EPSILON;
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[(i, j)].abs();
        }
    }
    let mut out = vec![Complex::new(0.0, 0.0); n];
    let mut nn = n as isize - 1;
    let mut t = 0.0;
    while nn >= 0 {
        let mut its = 0;
        loop {
            let nu = nn as usize;
            let mut l = nu;
            while l > 0 {
                let mut s = a[(l - 1, l - 1)].abs() + a[(l, l)].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[(l, l - 1)].abs() <= eps * s {
                    a[(l, l - 1)] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[(nu, nu)];
            if l == nu {
                out[nu] = Complex::new(x + t, 0.0);
                nn -= 1;
                break;
            }
            let mut y = a[(nu - 1, nu - 1)];
            let mut w = a[(nu, nu - 1)] * a[(nu - 1, nu)];
            if l == nu - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    let z = p + z.copysign(p);
                    out[nu - 1] = Complex::new(x + z, 0.0);
                    out[nu] = Complex::new(if z != 0.0 { x - w / z } else { x + z }, 0.0);
                } else {
                    out[nu] = Complex::new(x + p, -z);
                    out[nu - 1] = Complex::new(x + p, z);
                }
                nn -= 2;
                break;
            }
            if its == QR_MAX_ITER {
                return Err(Error::NotConverged { iterations: its });
            }
            if its > 0 && its % 10 == 0 {
                // exceptional shift
                t += x;
                for i in 0..=nu {
                    a[(i, i)] -= x;
                }
                let s = a[(nu, nu - 1)].abs() + a[(nu - 1, nu - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            let (mut p, mut q, mut r);
            let mut m = nu - 2;
            loop {
                let z = a[(m, m)];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[(m + 1, m)] + a[(m, m + 1)];
                q = a[(m + 1, m + 1)] - z - rr - ss;
                r = a[(m + 2, m + 1)];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[(m, m - 1)].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[(m - 1, m - 1)].abs() + z.abs() + a[(m + 1, m + 1)].abs());
                if u <= eps * v {
                    break;
                }
                m -= 1;
            }
            for i in m..nu - 1 {
                a[(i + 2, i)] = 0.0;
                if i != m {
                    a[(i + 2, i - 1)] = 0.0;
                }
            }
            let mut k = m;
            while k < nu {
                if k != m {
                    p = a[(k, k - 1)];
                    q = a[(k + 1, k - 1)];
                    r = if k + 1 != nu { a[(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = (p * p + q * q + r * r).sqrt().copysign(p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a[(k, k - 1)] = -a[(k, k - 1)];
                        }
                    } else {
                        a[(k, k - 1)] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    let z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nu {
                        let mut pp = a[(k, j)] + q * a[(k + 1, j)];
                        if k + 1 != nu {
                            pp += r * a[(k + 2, j)];
                            a[(k + 2, j)] -= pp * z;
                        }
                        a[(k + 1, j)] -= pp * y;
                        a[(k, j)] -= pp * x;
                    }
                    let mmin = nu.min(k + 3);
                    for i in l..=mmin {
                        let mut pp = x * a[(i, k)] + y * a[(i, k + 1)];
                        if k + 1 != nu {
                            pp += z * a[(i, k + 2)];
                            a[(i, k + 2)] -= pp * r;
                        }
                        a[(i, k + 1)] -= pp * q;
                        a[(i, k)] -= pp;
                    }
                }
                k += 1;
            }
        }
    }
    Ok(out)
}

/// `max Re(λ)` over the spectrum of `m`; `NaN` if the eigenvalue iteration
/// fails, which every `< 0` stability test reads as unstable.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> f64 {
    match eigenvalues(m) {
        Ok(ev) => ev.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max),
        Err(_) => f64::NAN,
    }
}

/// PBH test: every eigenvalue with non-negative real part must keep
/// `[A − λI, B]` at full row rank (relative threshold `1e-10`).
pub fn is_stabilizable(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<bool> {
    let n = a.nrows();
    let scale = a.norm().max(b.norm()).max(1.0);
    let a_c = a.map(|x| Complex::new(x, 0.0));
    let b_c = b.map(|x| Complex::new(x, 0.0));
    for lambda in eigenvalues(a)? {
        if lambda.re < -1e-10 * scale {
            continue;
        }
        let mut pencil = DMatrix::<Complex<f64>>::zeros(n, n + b.ncols());
        let shifted = &a_c - DMatrix::<Complex<f64>>::identity(n, n) * lambda;
        pencil.view_mut((0, 0), (n, n)).copy_from(&shifted);
        pencil.view_mut((0, n), (n, b.ncols())).copy_from(&b_c);
        // singular values of the wide pencil from the n×n Gram matrix
        let gram = &pencil * pencil.adjoint();
        let sv = gram
            .try_svd(false, false, 1e-15, 10_000)
            .ok_or(Error::NotConverged { iterations: 10_000 })?
            .singular_values;
        let smin = sv.iter().copied().fold(f64::INFINITY, f64::min).sqrt();
        if smin <= 1e-10 * scale {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Solves `Aᵀ X + X A + M = 0` through the Kronecker form.
pub fn solve_lyapunov(a: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = ensure_square(a, "Lyapunov matrix")?;
    if m.shape() != (n, n) {
        return Err(Error::DimensionMismatch {
            expected: format!("{n}×{n}"),
            actual: format!("{}×{}", m.nrows(), m.ncols()),
        });
    }
    let ident = DMatrix::<f64>::identity(n, n);
    let at = a.transpose();
    let op = ident.kronecker(&at) + at.kronecker(&ident);
    let rhs = DMatrix::from_column_slice(n * n, 1, (-m).as_slice());
    let vec_x = op
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NoStabilizingSolution("singular Lyapunov operator".into()))?;
    Ok(DMatrix::from_column_slice(n, n, vec_x.as_slice()))
}

/// Data of `AᵀP + PA − PBR⁻¹BᵀP + Q = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CareProblem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl CareProblem {
    /// Validates shapes, symmetry, `Q ⪰ 0` and `R ≻ 0`. Stabilizability is
    /// checked by [`solve_care`].
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        let n = ensure_square(&a, "A")?;
        let m = ensure_square(&r, "R")?;
        ensure_square(&q, "Q")?;
        if b.shape() != (n, m) || q.nrows() != n {
            return Err(Error::DimensionMismatch {
                expected: format!("B {n}×{m}, Q {n}×{n}"),
                actual: format!(
                    "B {}×{}, Q {}×{}",
                    b.nrows(),
                    b.ncols(),
                    q.nrows(),
                    q.ncols()
                ),
            });
        }
        if b.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("B"));
        }
        let sym_tol = |x: &DMatrix<f64>| 1e-10 * x.norm().max(1.0);
        if (&q - q.transpose()).norm() > sym_tol(&q) {
            return Err(Error::invalid("Q must be symmetric"));
        }
        if (&r - r.transpose()).norm() > sym_tol(&r) {
            return Err(Error::invalid("R must be symmetric"));
        }
        let q_min = q.clone().symmetric_eigenvalues().min();
        if n > 0 && q_min < -1e-10 * q.norm().max(1.0) {
            return Err(Error::invalid("Q must be positive semi-definite"));
        }
        if r.clone().cholesky().is_none() {
            return Err(Error::invalid("R must be positive definite"));
        }
        Ok(Self { a, b, q, r })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }
    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// `R⁻¹ Bᵀ P`.
    pub fn gain_for(&self, p: &DMatrix<f64>) -> DMatrix<f64> {
        let chol = self
            .r
            .clone()
            .cholesky()
            .expect("R validated positive definite");
        chol.solve(&(self.b.transpose() * p))
    }

    /// `AᵀP + PA − PBR⁻¹BᵀP + Q`.
    pub fn residual(&self, p: &DMatrix<f64>) -> DMatrix<f64> {
        let gain = self.gain_for(p);
        self.a.transpose() * p + p * &self.a - p * &self.b * gain + &self.q
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CareSolution {
    /// Stabilizing solution `P`.
    pub p: DMatrix<f64>,
    /// `R⁻¹ Bᵀ P`.
    pub gain: DMatrix<f64>,
    /// Frobenius norm of the Riccati residual at `p`.
    pub residual_norm: f64,
}

const SIGN_MAX_ITER: usize = 100;
const NEWTON_MAX_ITER: usize = 30;

/// Stabilizing solution of the CARE.
///
/// A matrix-sign-function iteration on the Hamiltonian gives the initial
/// solution, which is polished by Newton–Kleinman steps. Fails with
/// [`Error::NotStabilizable`] when `(A, B)` has an unreachable unstable mode and
/// with [`Error::NoStabilizingSolution`] when the Hamiltonian has (numerically)
/// imaginary-axis eigenvalues, e.g. an undetectable `(Q, A)`.
pub fn solve_care(prob: &CareProblem) -> Result<CareSolution> {
    let n = prob.a.nrows();
    if !is_stabilizable(&prob.a, &prob.b)? {
        return Err(Error::NotStabilizable);
    }
    if n == 0 {
        let empty = DMatrix::zeros(0, 0);
        return Ok(CareSolution {
            p: empty,
            gain: DMatrix::zeros(prob.b.ncols(), 0),
            residual_norm: 0.0,
        });
    }

    let mut p = sign_function_solution(prob)?;
    let tol = 1e-8 * prob.q.norm().max(1.0);
    let mut best_res = prob.residual(&p).norm();

    for _ in 0..NEWTON_MAX_ITER {
        if best_res <= 1e-14 * prob.q.norm().max(1.0) {
            break;
        }
        let gain = prob.gain_for(&p);
        let closed = &prob.a - &prob.b * &gain;
        if spectral_abscissa(&closed) >= 0.0 {
            break;
        }
        let rhs = &prob.q + gain.transpose() * &prob.r * &gain;
        let next = match solve_lyapunov(&closed, &rhs) {
            Ok(x) => symmetrize(&x),
            Err(_) => break,
        };
        let res = prob.residual(&next).norm();
        let step = (&next - &p).norm();
        if !res.is_finite() || res >= best_res {
            break;
        }
        p = next;
        best_res = res;
        if step <= 1e-15 * p.norm() {
            break;
        }
    }

    if !(best_res <= tol) {
        return Err(Error::NoStabilizingSolution(format!(
            "residual {best_res:.3e} exceeds {tol:.3e}"
        )));
    }
    let gain = prob.gain_for(&p);
    let closed = &prob.a - &prob.b * &gain;
    if !(spectral_abscissa(&closed) < 0.0) {
        return Err(Error::NoStabilizingSolution(
            "closed loop is not Hurwitz".into(),
        ));
    }
    let p_min = p.clone().symmetric_eigenvalues().min();
    if p_min < -1e-8 * p.norm().max(1.0) {
        return Err(Error::NoStabilizingSolution(
            "Riccati solution is indefinite".into(),
        ));
    }
    Ok(CareSolution {
        p,
        gain,
        residual_norm: best_res,
    })
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn log_abs_det(m: &DMatrix<f64>) -> Option<f64> {
    let lu = m.clone().lu();
    let u = lu.u();
    let mut acc = 0.0;
    for i in 0..u.nrows() {
        let d = u[(i, i)].abs();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        acc += d.ln();
    }
    Some(acc)
}

fn sign_function_solution(prob: &CareProblem) -> Result<DMatrix<f64>> {
    let n = prob.a.nrows();
    let g = &prob.b * prob.gain_for(&DMatrix::identity(n, n));
    let mut h = DMatrix::<f64>::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&prob.a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&g));
    h.view_mut((n, 0), (n, n)).copy_from(&(-&prob.q));
    h.view_mut((n, n), (n, n)).copy_from(&(-prob.a.transpose()));

    let fail = || Error::NoStabilizingSolution("Hamiltonian has imaginary-axis eigenvalues".into());
    let mut z = h;
    let mut converged = false;
    for _ in 0..SIGN_MAX_ITER {
        let log_det = log_abs_det(&z).ok_or_else(fail)?;
        let inv = z.clone().try_inverse().ok_or_else(fail)?;
        let c = (log_det / (2 * n) as f64).exp();
        let next = (&z / c + inv * c) * 0.5;
        if next.iter().any(|x| !x.is_finite()) {
            return Err(fail());
        }
        let delta = norm1(&(&next - &z));
        z = next;
        if delta <= 1e-13 * norm1(&z) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NotConverged {
            iterations: SIGN_MAX_ITER,
        });
    }

    // [W12; W22 + I] P = −[W11 + I; W21]
    let ident = DMatrix::<f64>::identity(n, n);
    let mut lhs = DMatrix::<f64>::zeros(2 * n, n);
    let mut rhs = DMatrix::<f64>::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n))
        .copy_from(&z.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n))
        .copy_from(&(z.view((n, n), (n, n)) + &ident));
    rhs.view_mut((0, 0), (n, n))
        .copy_from(&(-(z.view((0, 0), (n, n)) + &ident)));
    rhs.view_mut((n, 0), (n, n))
        .copy_from(&(-z.view((n, 0), (n, n))));
    let p = lhs
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::NoStabilizingSolution(e.to_string()))?;
    Ok(symmetrize(&p))
}
