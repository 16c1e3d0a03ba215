//! Side-by-side comparison of the reference configuration against its tabulated values.

use std::fmt::Write;

use heatpencil_core::pipeline::IdentificationResult;

#[derive(Debug, Clone, Copy)]
pub enum Tolerance {
    Abs(f64),
    Rel(f64),
    /// Accepted when within this factor of the reference, for round-off level quantities.
    Factor(f64),
    Exact,
}

/// How a reference value is printed; computed values are rounded the same way before comparing.
#[derive(Debug, Clone, Copy)]
pub enum Notation {
    Fixed(usize),
    Sci(usize),
    Int,
}

#[derive(Debug, Clone)]
pub struct Row {
    pub table: &'static str,
    pub field: String,
    pub reference: f64,
    pub computed: f64,
    pub notation: Notation,
    pub tolerance: Tolerance,
}

fn round_sci(v: f64, digits: usize) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{v:.digits$e}").parse().unwrap_or(v)
}

impl Row {
    pub fn rounded(&self) -> f64 {
        match self.notation {
            Notation::Fixed(d) => format!("{:.d$}", self.computed)
                .parse()
                .unwrap_or(self.computed),
            Notation::Sci(d) => round_sci(self.computed, d),
            Notation::Int => self.computed.round(),
        }
    }

    pub fn passes(&self) -> bool {
        let got = self.rounded();
        let want = self.reference;
        if !got.is_finite() {
            return false;
        }
        match self.tolerance {
            Tolerance::Abs(t) => (got - want).abs() <= t,
            Tolerance::Rel(t) => ((got - want) / want).abs() <= t,
            Tolerance::Factor(f) => got > 0.0 && got <= want * f && got >= want / f,
            Tolerance::Exact => got == want,
        }
    }

    pub fn fmt(&self, v: f64) -> String {
        if !v.is_finite() {
            return "n/a".into();
        }
        match self.notation {
            Notation::Fixed(d) => format!("{v:.d$}"),
            Notation::Sci(d) => format!("{v:.d$e}"),
            Notation::Int => format!("{}", v.round() as i64),
        }
    }

    fn fmt_tolerance(&self) -> String {
        match self.tolerance {
            Tolerance::Abs(t) => format!("abs {t:e}"),
            Tolerance::Rel(t) => format!("rel {t:e}"),
            Tolerance::Factor(f) => format!("factor {f}"),
            Tolerance::Exact => "exact".into(),
        }
    }
}

fn row(
    table: &'static str,
    field: impl Into<String>,
    reference: f64,
    computed: f64,
    notation: Notation,
    tolerance: Tolerance,
) -> Row {
    Row {
        table,
        field: field.into(),
        reference,
        computed,
        notation,
        tolerance,
    }
}

pub const INTERVAL: (f64, f64) = (3.9921, 4.0079);

pub fn rows(res: &IdentificationResult) -> Vec<Row> {
    use Notation::*;
    use Tolerance::*;
    let mut out = Vec::new();

    let mut poles = res.diagnostics.free_pencil.poles.clone();
    poles.sort_by(|a, b| b.total_cmp(a));
    let free = &res.free_modes;
    let at = |v: &[f64], k: usize| v.get(k).copied().unwrap_or(f64::NAN);
    let rates: Vec<f64> = free.iter().map(|m| m.lambda).collect();
    let coefs: Vec<f64> = free.iter().map(|m| m.coefficient).collect();
    out.push(row(
        "free window",
        "order",
        2.0,
        free.len() as f64,
        Int,
        Exact,
    ));
    for (k, want) in [1.0000, 0.6738].into_iter().enumerate() {
        out.push(row(
            "free window",
            format!("z~{k}"),
            want,
            at(&poles, k),
            Fixed(4),
            Abs(5e-4),
        ));
    }
    for (k, want) in [0.0000, 39.4784].into_iter().enumerate() {
        out.push(row(
            "free window",
            format!("lambda~{k}"),
            want,
            at(&rates, k),
            Fixed(4),
            Abs(5e-4),
        ));
    }
    for (k, want) in [0.5000, -9.4077].into_iter().enumerate() {
        out.push(row(
            "free window",
            format!("C~{k}"),
            want,
            at(&coefs, k),
            Fixed(4),
            Abs(5e-4),
        ));
    }

    let step = &res.diagnostics.step_modes;
    out.push(row(
        "controlled window",
        "M'",
        5.0,
        step.len() as f64,
        Int,
        Exact,
    ));
    let c_prime: Vec<f64> = step.iter().map(|m| 100.0 * m.c_prime).collect();
    let l_prime: Vec<f64> = step.iter().map(|m| 100.0 * m.lambda_prime).collect();
    for (k, want) in [-8.3333, 5.0661, 1.2665, 0.5664, 1.4090]
        .into_iter()
        .enumerate()
    {
        out.push(row(
            "controlled window",
            format!("100 C'{k}"),
            want,
            at(&c_prime, k),
            Fixed(4),
            Abs(5e-3),
        ));
    }
    for (k, want) in [0.0000, 39.4784, 157.9137, 355.5370, 790.8813]
        .into_iter()
        .enumerate()
    {
        out.push(row(
            "controlled window",
            format!("100 lambda'{k}"),
            want,
            at(&l_prime, k),
            Fixed(4),
            Abs(5e-3),
        ));
    }
    for n in 1..=3usize {
        let credible = step.iter().any(|m| m.index == n && m.credible);
        let want = if n <= 2 { 1.0 } else { 0.0 };
        out.push(row(
            "controlled window",
            format!("credible n={n}"),
            want,
            if credible { 1.0 } else { 0.0 },
            Int,
            Exact,
        ));
    }
    out.push(row(
        "controlled window",
        "alpha (step 3)",
        4.0,
        res.alpha_candidates.step3,
        Fixed(4),
        Abs(1e-3),
    ));

    let cert = res.certificate.as_ref();
    let c = |f: &dyn Fn(&heatpencil_core::ErrorCertificate) -> f64| cert.map(f).unwrap_or(f64::NAN);
    out.push(row("certificate", "M0", 15.0, c(&|c| c.m0), Int, Exact));
    out.push(row(
        "certificate",
        "alpha0",
        3.0,
        c(&|c| c.alpha0),
        Int,
        Exact,
    ));
    out.push(row("certificate", "M", 2.0, c(&|c| c.m as f64), Int, Exact));
    out.push(row(
        "certificate",
        "N",
        50.0,
        c(&|c| c.n as f64),
        Int,
        Exact,
    ));
    out.push(row(
        "certificate",
        "L",
        17.0,
        c(&|c| c.l as f64),
        Int,
        Exact,
    ));
    out.push(row(
        "certificate",
        "T1",
        0.3,
        c(&|c| c.t1),
        Fixed(4),
        Abs(1e-12),
    ));
    out.push(row(
        "certificate",
        "Ts",
        0.01,
        c(&|c| c.ts),
        Fixed(4),
        Abs(1e-12),
    ));
    out.push(row(
        "certificate",
        "theta",
        2.3687,
        c(&|c| c.theta),
        Fixed(4),
        Abs(1e-4),
    ));
    out.push(row(
        "certificate",
        "M_theta_L",
        0.0936,
        c(&|c| c.m_theta_l),
        Fixed(4),
        Abs(1e-4),
    ));
    out.push(row(
        "certificate",
        "||Y1||_2",
        11.8427,
        c(&|c| c.y1_norm),
        Fixed(4),
        Abs(1e-2),
    ));
    out.push(row(
        "certificate",
        "sigma_M",
        9.5089e-5,
        c(&|c| c.sigma_m),
        Sci(4),
        Rel(0.01),
    ));
    out.push(row(
        "certificate",
        "||Y0M - Y0||_2",
        2.2494e-15,
        c(&|c| c.y0_trunc_gap),
        Sci(4),
        Factor(10.0),
    ));
    out.push(row(
        "certificate",
        "kappa(X_M)",
        17.9467,
        c(&|c| c.kappa_xm),
        Fixed(4),
        Rel(0.01),
    ));
    out.push(row(
        "certificate",
        "rho",
        1.4522e-10,
        c(&|c| c.rho),
        Sci(4),
        Rel(0.05),
    ));
    out.push(row(
        "bounds",
        "pole bound",
        5.2521e-4,
        c(&|c| c.pole_bound),
        Sci(4),
        Rel(0.05),
    ));
    out.push(row(
        "bounds",
        "alpha interval low",
        INTERVAL.0,
        c(&|c| c.alpha_interval.0),
        Fixed(4),
        Abs(1e-3),
    ));
    out.push(row(
        "bounds",
        "alpha interval high",
        INTERVAL.1,
        c(&|c| c.alpha_interval.1),
        Fixed(4),
        Abs(1e-3),
    ));
    out.push(row(
        "reconstruction",
        "alpha_hat",
        4.0,
        res.alpha_hat,
        Fixed(4),
        Abs(1e-3),
    ));
    out.push(row(
        "reconstruction",
        "GCV k",
        6.0,
        res.gcv_k as f64,
        Int,
        Exact,
    ));
    out
}

pub fn report(rows: &[Row], res: &IdentificationResult, manifest: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Reference reproduction\n");
    let _ = writeln!(
        s,
        "alpha = 4, u0(x) = x - 9 cos(pi x) + 5 cos(3 pi x), windows 0.3 / 0.8 / 1.3, \
         N1 = N2 = 50, epsilon = 1e-10, priors M0 = 15, alpha0 = 3.\n"
    );
    let _ = writeln!(s, "Manifest: `{manifest}`\n");
    let mut table = "";
    for r in rows {
        if r.table != table {
            table = r.table;
            let mut c = table.chars();
            let heading = c
                .next()
                .map(|f| f.to_uppercase().collect::<String>() + c.as_str())
                .unwrap_or_default();
            let _ = writeln!(s, "\n## {heading}\n");
            let _ = writeln!(
                s,
                "| field | reference | computed | full precision | tolerance | status |"
            );
            let _ = writeln!(s, "|---|---|---|---|---|---|");
        }
        let _ = writeln!(
            s,
            "| {} | {} | {} | {:e} | {} | {} |",
            r.field,
            r.fmt(r.reference),
            r.fmt(r.rounded()),
            r.computed,
            r.fmt_tolerance(),
            if r.passes() { "ok" } else { "MISMATCH" }
        );
    }

    let _ = writeln!(s, "\n## Interval\n");
    match &res.certificate {
        Some(c) => {
            let _ = writeln!(
                s,
                "alpha lies between {:.4} and {:.4} (reference: between {:.4} and {:.4}).",
                c.alpha_interval.0, c.alpha_interval.1, INTERVAL.0, INTERVAL.1
            );
        }
        None => {
            let why = res
                .diagnostics
                .certificate_error
                .as_deref()
                .unwrap_or("unknown");
            let _ = writeln!(s, "No certificate: {why}.");
        }
    }

    let failed: Vec<&Row> = rows.iter().filter(|r| !r.passes()).collect();
    let _ = writeln!(s, "\n## Summary\n");
    if failed.is_empty() {
        let _ = writeln!(s, "All {} fields within tolerance.", rows.len());
    } else {
        let _ = writeln!(
            s,
            "{} of {} fields outside tolerance:\n",
            failed.len(),
            rows.len()
        );
        let _ = writeln!(s, "| group | field | reference | computed | difference |");
        let _ = writeln!(s, "|---|---|---|---|---|");
        for r in failed {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {:e} |",
                r.table,
                r.field,
                r.fmt(r.reference),
                r.fmt(r.rounded()),
                r.rounded() - r.reference
            );
        }
    }
    s
}
