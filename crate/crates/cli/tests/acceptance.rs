//! End-to-end acceptance run: one PASS/FAIL line per criterion.

use std::process::ExitCode;
use std::time::Instant;

use qkck_cli::{run_suite, Report, Suite, SuiteConfig};

const SEED: u64 = 7;

fn run(suite: Suite, loops: usize) -> (Report, f64) {
    let cfg = SuiteConfig { suite, n: 2, samples: 20, seed: SEED, loops, ..SuiteConfig::default() };
    let t = Instant::now();
    let rep = run_suite(&cfg).unwrap_or_else(|e| panic!("suite {} could not run: {e}", suite.name()));
    (rep, t.elapsed().as_secs_f64())
}

struct Criterion<'a> {
    id: usize,
    title: &'static str,
    checks: Vec<(&'a Report, &'static str)>,
    /// Wall-time budget in seconds with the measured time.
    budget: Option<(f64, f64)>,
    extra: String,
}

fn main() -> ExitCode {
    let start = Instant::now();
    let (qalg, _) = run(Suite::Qalg, 1);
    let (curvature, _) = run(Suite::Curvature, 1);
    let (flat, t_flat) = run(Suite::Flat, 64);
    let (hpn, t_hpn) = run(Suite::Hpn, 1);
    let (dim, t_dim) = run(Suite::Dim, 64);
    let (gr2, t_gr2) = run(Suite::Grassmannian, 1);
    let (ck, t_ck) = run(Suite::Ck, 1);
    let (bracket, t_bracket) = run(Suite::Bracket, 1);
    let (qalg, curvature, flat, hpn, dim, gr2, ck, bracket) = (&qalg, &curvature, &flat, &hpn, &dim, &gr2, &ck, &bracket);

    let gram_note = dim.check("killing_gram_rank").and_then(|c| c.note.clone()).unwrap_or_default();
    let criteria = vec![
        Criterion {
            id: 1,
            title: "flatness: R^D = 0 and full holonomy fixed space on H^2 and HP^2",
            checks: vec![
                (flat, "rd_flat"),
                (hpn, "rd_hpn"),
                (hpn, "rd_hpn_commutator"),
                (flat, "holonomy_flat_fixed_dim"),
                (flat, "holonomy_flat_gap"),
                (dim, "holonomy_fixed_dim"),
                (dim, "holonomy_gap"),
            ],
            budget: Some((120.0, t_flat + t_hpn + t_dim)),
            extra: String::new(),
        },
        Criterion {
            id: 2,
            title: "non-flat direction on Gr2(C^4)",
            checks: vec![(gr2, "gr2_weylq_valid"), (gr2, "gr2_weyl_ratio"), (gr2, "RD_nonzero"), (gr2, "rd_commutator_gr2")],
            budget: Some((10.0, t_gr2)),
            extra: String::new(),
        },
        Criterion {
            id: 3,
            title: "dimension (n+1)(2n+3) = 21 by holonomy and by Killing forms",
            checks: vec![(dim, "holonomy_fixed_dim"), (dim, "killing_gram_rank")],
            budget: None,
            extra: gram_note,
        },
        Criterion {
            id: 4,
            title: "D-parallel sections are conformal-Killing and conversely",
            checks: vec![
                (ck, "transported_ck_residual"),
                (ck, "transported_codifferential"),
                (ck, "killing_ck_parallel"),
                (ck, "killing_ck_codifferential"),
            ],
            budget: Some((180.0, t_ck)),
            extra: String::new(),
        },
        Criterion {
            id: 5,
            title: "codifferential ratios, dψ formula, twistor and Penrose identities",
            checks: vec![
                (ck, "codiff_ratio_s2h"),
                (ck, "codiff_ratio_s2e"),
                (ck, "dpsi_formula"),
                (ck, "twistor_equation"),
                (ck, "penrose_residual"),
                (ck, "penrose_inverse"),
            ],
            budget: None,
            extra: String::new(),
        },
        Criterion {
            id: 6,
            title: "ψ is recovered from its S²E part",
            checks: vec![(ck, "s2e_roundtrip"), (ck, "hamiltonian_equation")],
            budget: None,
            extra: String::new(),
        },
        Criterion {
            id: 7,
            title: "conformal-Killing bracket is the sp(3) Lie algebra",
            checks: vec![
                (bracket, "bracket_codifferential"),
                (bracket, "bracket_compatible"),
                (bracket, "bracket_closure"),
                (bracket, "structure_constants"),
                (bracket, "killing_structure"),
                (bracket, "jacobi"),
            ],
            budget: None,
            extra: format!("bracket suite {t_bracket:.1} s"),
        },
        Criterion {
            id: 8,
            title: "geometry self-validation and algebraic identities",
            checks: vec![
                (hpn, "hpn_weyl_residual"),
                (hpn, "hpn_nu_spread"),
                (hpn, "hpn_nu_value"),
                (qalg, "basis_relations"),
                (qalg, "kahler_norms"),
                (qalg, "projection_identities"),
                (qalg, "put_identity"),
                (curvature, "base_spectrum"),
                (curvature, "rd_algebraic"),
            ],
            budget: None,
            extra: String::new(),
        },
    ];

    let mut all = true;
    for c in &criteria {
        let mut ok = true;
        let mut parts = Vec::new();
        for (rep, name) in &c.checks {
            match rep.check(name) {
                Some(chk) => {
                    ok &= chk.pass;
                    parts.push(format!("{name}={:.3e}{}", chk.max_residual, if chk.pass { "" } else { "(!)" }));
                }
                None => {
                    ok = false;
                    parts.push(format!("{name}=missing"));
                }
            }
        }
        if let Some((limit, took)) = c.budget {
            ok &= took <= limit;
            parts.push(format!("time {took:.1}s/{limit:.0}s"));
        }
        if !c.extra.is_empty() {
            parts.push(c.extra.clone());
        }
        all &= ok;
        println!("{} criterion {}: {} | {}", if ok { "PASS" } else { "FAIL" }, c.id, c.title, parts.join(", "));
    }
    println!("total {:.1} s", start.elapsed().as_secs_f64());
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
