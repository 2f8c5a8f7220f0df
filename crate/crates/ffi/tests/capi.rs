use std::ffi::{CStr, CString};
use std::ptr;

use pacinv_ffi::*;

const SEM: &str = r#"
variables = ["X1", "X2", "Xt"]
target = "Xt"
edges = [
    { from = "X1", to = "X2", weight = 0.5 },
    { from = "X2", to = "Xt", weight = 2.0 },
]

[noise]
X1 = { variance = 1.0 }
X2 = { variance = 1.0 }
Xt = { variance = 0.1 }
"#;

fn load(text: &str) -> (PacinvStatus, *mut PacinvSem) {
    let c = CString::new(text).unwrap();
    let mut sem = ptr::null_mut();
    let status = unsafe { pacinv_sem_from_toml(c.as_ptr(), &mut sem) };
    (status, sem)
}

fn last_error() -> String {
    let p = pacinv_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/pacinv.h")).unwrap();
    for sym in [
        "pacinv_last_error",
        "pacinv_sem_from_toml",
        "pacinv_sem_free",
        "pacinv_sem_num_covariates",
        "pacinv_sem_apply_hard",
        "pacinv_population_gradient",
        "pacinv_is_eps_invariant",
        "pacinv_sample_dataset",
        "pacinv_dataset_free",
        "pacinv_dataset_rows",
        "pacinv_dataset_vars",
        "pacinv_dataset_copy",
        "pacinv_least_squares_head",
        "pacinv_split_gradient_norm",
        "pacinv_interventional_complexity",
        "pacinv_sample_complexity",
        "pacinv_covering_number_log",
        "pacinv_rho_statistic",
        "typedef struct PacinvSem PacinvSem",
        "PACINV_STATUS_CYCLE = 4",
    ] {
        assert!(header.contains(sym), "{sym} missing from header");
    }
}

#[test]
fn parent_representation_is_invariant_under_hard_shift() {
    let (status, sem) = load(SEM);
    assert_eq!(status, PacinvStatus::Ok);
    assert_eq!(unsafe { pacinv_sem_num_covariates(sem) }, 2);

    let (vars, vals) = ([0usize], [3.0]);
    let mut env = ptr::null_mut();
    let status = unsafe { pacinv_sem_apply_hard(sem, vars.as_ptr(), vals.as_ptr(), 1, &mut env) };
    assert_eq!(status, PacinvStatus::Ok);

    let phi = [0.0, 1.0];
    let head = [0.0, 2.0];
    let mut grad = [f64::NAN; 2];
    let mut ok = false;
    unsafe {
        assert_eq!(pacinv_population_gradient(env, phi.as_ptr(), head.as_ptr(), 2, grad.as_mut_ptr()), PacinvStatus::Ok);
        assert_eq!(pacinv_is_eps_invariant(env, phi.as_ptr(), head.as_ptr(), 2, 1e-10, &mut ok), PacinvStatus::Ok);
    }
    assert!(grad.iter().all(|g| g.abs() < 1e-12), "{grad:?}");
    assert!(ok);

    let wrong = [0.0, 1.0];
    unsafe {
        pacinv_is_eps_invariant(env, phi.as_ptr(), wrong.as_ptr(), 2, 1e-3, &mut ok);
        pacinv_sem_free(env);
        pacinv_sem_free(sem);
    }
    assert!(!ok);
}

#[test]
fn dataset_round_trip_and_estimators() {
    let (_, sem) = load(SEM);
    let mut data = ptr::null_mut();
    unsafe {
        assert_eq!(pacinv_sample_dataset(sem, 20_000, 9, &mut data), PacinvStatus::Ok);
        assert_eq!(pacinv_dataset_rows(data), 20_000);
        assert_eq!(pacinv_dataset_vars(data), 3);
    }
    let mut buf = vec![0.0; 60_000];
    unsafe {
        assert_eq!(pacinv_dataset_copy(data, buf.as_mut_ptr(), buf.len()), PacinvStatus::Ok);
        assert_eq!(pacinv_dataset_copy(data, buf.as_mut_ptr(), 5), PacinvStatus::DimensionMismatch);
    }
    // row-major: Xt - 2 X2 is target noise only
    let resid: f64 = buf.chunks(3).map(|r| (r[2] - 2.0 * r[1]).powi(2)).sum::<f64>() / 20_000.0;
    assert!((resid - 0.1).abs() < 0.01, "{resid}");

    let phi = [0.0, 1.0];
    let mut head = [0.0; 2];
    let mut norm = f64::NAN;
    unsafe {
        assert_eq!(pacinv_least_squares_head(data, phi.as_ptr(), 2, head.as_mut_ptr()), PacinvStatus::Ok);
        assert_eq!(pacinv_split_gradient_norm(data, phi.as_ptr(), head.as_ptr(), 2, &mut norm), PacinvStatus::Ok);
        pacinv_dataset_free(data);
        pacinv_sem_free(sem);
    }
    assert_eq!(head[0], 0.0);
    assert!((head[1] - 2.0).abs() < 0.02, "{head:?}");
    assert!(norm < 0.05, "{norm}");
}

#[test]
fn budgets_match_closed_forms() {
    let mut log = 0.0;
    unsafe { assert_eq!(pacinv_covering_number_log(3, 0.1, &mut log), PacinvStatus::Ok) };
    let want = 9.0 * (1.0 + 4.0 * 3f64.powf(1.5) / 0.1).ln();
    assert!((log - want).abs() < 1e-12);

    let mut m = 0;
    unsafe {
        assert_eq!(
            pacinv_interventional_complexity(PacinvBudgetKind::HardK, 0, 2, 0, 0.1, 0.5, 1.0, &mut m),
            PacinvStatus::Ok
        );
    }
    assert_eq!(m, ((16.0 + 10f64.ln()) / 0.5).ceil() as u64);

    let mut n = 0;
    unsafe { assert_eq!(pacinv_sample_complexity(2, 1.0, 0.1, 0.1, 5, 1.0, &mut n), PacinvStatus::Ok) };
    let want = 800.0 * ((200f64).ln() + 4.0 * (1.0 + 8.0 * 2f64.powf(1.5) / 0.1).ln());
    assert_eq!(n, want.ceil() as u64);

    unsafe {
        assert_eq!(pacinv_sample_complexity(2, 1.0, 0.1, 1.5, 5, 1.0, &mut n), PacinvStatus::InvalidArgument);
    }
    assert!(last_error().contains("delta"));
}

#[test]
fn rho_of_identical_heads_is_zero() {
    let heads = [1.0, 2.0, 1.0, 2.0, 1.0, 2.0];
    let mut rho = f64::NAN;
    unsafe { assert_eq!(pacinv_rho_statistic(heads.as_ptr(), 3, 2, &mut rho), PacinvStatus::Ok) };
    assert_eq!(rho, 0.0);
    unsafe { assert_eq!(pacinv_rho_statistic(heads.as_ptr(), 1, 2, &mut rho), PacinvStatus::InvalidArgument) };
}

#[test]
fn errors_map_to_status_codes() {
    let cyclic = r#"
variables = ["A", "B", "T"]
target = "T"
edges = [{ from = "A", to = "B", weight = 1.0 }, { from = "B", to = "A", weight = 1.0 }]
noise = { A = { variance = 1.0 }, B = { variance = 1.0 }, T = { variance = 1.0 } }
"#;
    assert_eq!(load(cyclic).0, PacinvStatus::Cycle);
    assert_eq!(load("variables = [").0, PacinvStatus::Parse);
    assert!(!last_error().is_empty());

    let (_, sem) = load(SEM);
    let mut env = ptr::null_mut();
    let (vars, vals) = ([2usize], [1.0]);
    unsafe {
        assert_eq!(
            pacinv_sem_apply_hard(sem, vars.as_ptr(), vals.as_ptr(), 1, &mut env),
            PacinvStatus::TargetIntervened
        );
        assert!(env.is_null());
        let far = [7usize];
        assert_eq!(
            pacinv_sem_apply_hard(sem, far.as_ptr(), vals.as_ptr(), 1, &mut env),
            PacinvStatus::IndexOutOfRange
        );
        let phi = [1.0, 1.0];
        assert_eq!(pacinv_sem_from_toml(ptr::null(), &mut env), PacinvStatus::NullPointer);
        assert_eq!(pacinv_population_gradient(ptr::null(), phi.as_ptr(), phi.as_ptr(), 2, ptr::null_mut()), PacinvStatus::NullPointer);
        assert_eq!(pacinv_sem_num_covariates(ptr::null()), 0);
        pacinv_sem_free(ptr::null_mut());
        pacinv_sem_free(sem);
    }
}
