use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use episel_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(episel_last_error()) }.to_string_lossy().into_owned()
}

const NETWORK: &str = r#"{"n":2,"edges":[[1,1,0.5],[1,2,0.8],[2,2,0.5]],"h":0.1,
    "s0":[0.9,1.0],"x0":[0.1,0.0],"r0":[0,0]}"#;

#[test]
fn generated_instance_greedy_and_oracle() {
    unsafe {
        let name = CString::new("paper_small").unwrap();
        let mut inst = ptr::null_mut();
        assert_eq!(episel_generate_instance(5, name.as_ptr(), &mut inst), EPISEL_OK);
        let mut budget = 0.0;
        assert_eq!(episel_pems_instance_budget(inst, &mut budget), EPISEL_OK);
        assert!(budget > 0.0);

        let mut design = ptr::null_mut();
        assert_eq!(episel_design_prepare(inst, 12, &mut design), EPISEL_OK);
        let mut len = 0usize;
        assert_eq!(episel_design_len(design, &mut len), EPISEL_OK);
        assert_eq!(len, 10);

        let mut counts = vec![0u32; len];
        let mut greedy_value = 0.0;
        let code = episel_greedy(design, b'd' as _, budget, &mut greedy_value, counts.as_mut_ptr(), len);
        assert_eq!(code, EPISEL_OK);
        let mut check = 0.0;
        assert_eq!(episel_design_value(design, b'd' as _, counts.as_ptr(), len, &mut check), EPISEL_OK);
        assert_eq!(check, greedy_value);

        let mut opt = 0.0;
        let mut opt_counts = vec![0u32; len];
        let code = episel_brute_force(design, b'd' as _, budget, &mut opt, opt_counts.as_mut_ptr(), len);
        assert_eq!(code, EPISEL_OK);
        assert!(greedy_value <= opt + 1e-12);
        assert!(greedy_value >= 0.31 * opt);

        let mut short = vec![0u32; len - 1];
        let code = episel_greedy(design, b'd' as _, budget, &mut greedy_value, short.as_mut_ptr(), len - 1);
        assert_eq!(code, EPISEL_ERR_BUFFER);

        episel_design_free(design);
        episel_pems_instance_free(inst);
    }
}

#[test]
fn large_lattice_is_a_guard_refusal() {
    unsafe {
        let name = CString::new("paper_large").unwrap();
        let mut inst = ptr::null_mut();
        assert_eq!(episel_generate_instance(1, name.as_ptr(), &mut inst), EPISEL_OK);
        let mut design = ptr::null_mut();
        assert_eq!(episel_design_prepare(inst, 4, &mut design), EPISEL_OK);
        let mut len = 0;
        episel_design_len(design, &mut len);
        let mut counts = vec![0u32; len];
        let mut v = 0.0;
        let code = episel_brute_force(design, b'a' as _, 10.0, &mut v, counts.as_mut_ptr(), len);
        assert_eq!(code, EPISEL_ERR_GUARD);
        assert!(last_error().contains("guard"), "{}", last_error());
        episel_design_free(design);
        episel_pems_instance_free(inst);
    }
}

#[test]
fn errors_set_codes_and_messages() {
    unsafe {
        let mut inst = ptr::null_mut();
        let bad = CString::new("{").unwrap();
        assert_eq!(episel_pems_instance_from_json(bad.as_ptr(), &mut inst), EPISEL_ERR_INVALID);
        assert!(!last_error().is_empty());
        assert_eq!(episel_pems_instance_from_json(ptr::null(), &mut inst), EPISEL_ERR_NULL);
        let name = CString::new("nope").unwrap();
        assert_eq!(episel_generate_instance(0, name.as_ptr(), &mut inst), EPISEL_ERR_INVALID);
        assert!(last_error().contains("nope"));
        let (mut f, mut s) = (0.0, 0.0);
        assert_eq!(episel_guarantee(b'q' as _, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0, &mut f, &mut s), EPISEL_ERR_INVALID);
        episel_pems_instance_free(ptr::null_mut());
        episel_design_free(ptr::null_mut());
        episel_string_free(ptr::null_mut());
    }
}

#[test]
fn guarantee_constants() {
    let (mut f, mut s) = (0.0, 0.0);
    unsafe {
        assert_eq!(episel_guarantee(b'd' as _, 1.0, 1.0, 4.0, 1.0, 3.0, 0.0, &mut f, &mut s), EPISEL_OK);
    }
    assert!((f - 0.316060279).abs() < 1e-9);
    unsafe {
        assert_eq!(episel_guarantee(b'a' as _, 0.3, 2.0, 4.0, 1.0, 3.0, 0.0, &mut f, &mut s), EPISEL_OK);
    }
    assert!((f - 0.129590889).abs() < 1e-9);
}

#[test]
fn simulate_fills_row_major_buffers() {
    let net = CString::new(NETWORK).unwrap();
    let mut x = vec![f64::NAN; 8];
    let mut r = vec![f64::NAN; 8];
    unsafe {
        assert_eq!(episel_simulate(net.as_ptr(), 2.0, 1.0, 3, x.as_mut_ptr(), r.as_mut_ptr(), 8), EPISEL_OK);
        assert_eq!(episel_simulate(net.as_ptr(), 2.0, 1.0, 3, x.as_mut_ptr(), r.as_mut_ptr(), 7), EPISEL_ERR_BUFFER);
    }
    assert_eq!(x[0], 0.1);
    assert_eq!(x[1], 0.0);
    // Node 2 is one hop from the seed.
    assert!(x[3] > 0.0);
    assert_eq!(r[1], 0.0);
    assert_eq!(r[3], 0.0);
}

#[test]
fn pims_solve_returns_owned_ids() {
    let net = CString::new(NETWORK).unwrap();
    let costs = CString::new(
        r#"{"t1":1,"t2":3,
            "cost_x":[[1,1,1],[2,1,1],[3,1,1],[1,2,2],[2,2,2],[3,2,2]],
            "cost_r":[[1,1,1],[2,1,1],[3,1,1],[1,2,2],[2,2,2],[3,2,2]]}"#,
    )
    .unwrap();
    unsafe {
        let mut inst = ptr::null_mut();
        assert_eq!(episel_pims_instance_from_json(net.as_ptr(), costs.as_ptr(), &mut inst), EPISEL_OK, "{}", last_error());
        let (mut cost, mut bound) = (0.0, 0.0);
        let mut ids = ptr::null_mut();
        assert_eq!(episel_pims_solve(inst, &mut cost, &mut bound, &mut ids), EPISEL_OK, "{}", last_error());
        let text = CStr::from_ptr(ids).to_str().unwrap().to_owned();
        assert!(cost > 0.0);
        assert!(!text.is_empty());
        assert!(text.split(';').all(|id| id.starts_with("x_") || id.starts_with("r_")));
        episel_string_free(ids);
        episel_pims_instance_free(inst);
    }
}

#[test]
fn header_is_valid_c() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/episel.h")).unwrap();
    for name in ["episel_last_error", "episel_greedy", "episel_brute_force", "episel_pims_solve", "EPISEL_ERR_GUARD"] {
        assert!(header.contains(name), "{name} missing from header");
    }
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; skipping the syntax check");
        return;
    };
    let tmp = std::env::temp_dir().join(format!("episel_header_{}.c", std::process::id()));
    std::fs::write(&tmp, "#include \"episel.h\"\nint main(void) { return episel_last_error() == 0; }\n").unwrap();
    let status = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(dir.join("include"))
        .arg(&tmp)
        .status()
        .unwrap();
    let _ = std::fs::remove_file(&tmp);
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok_and(|o| o.status.success()))
        .ok_or(())
}
