use std::path::PathBuf;
use std::process::Command;

/// Builds the cdylib and runs the Python smoke test against it.
#[test]
fn python_smoke_test() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let root = manifest.parent().unwrap().parent().unwrap();
    let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".into());
    let build = Command::new(&cargo)
        .args(["build", "-p", "mflab-py"])
        .current_dir(root)
        .output()
        .expect("cargo build failed to spawn");
    assert!(build.status.success(), "stderr: {}", String::from_utf8_lossy(&build.stderr));

    let so = root.join("target/debug/libmflab_py.so");
    assert!(so.exists(), "missing {}", so.display());
    let run = Command::new("python3")
        .arg(root.join("python/smoke_test.py"))
        .env("MFLAB_PY_SO", &so)
        .output()
        .expect("python3 failed to spawn");
    assert!(
        run.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&run.stdout),
        String::from_utf8_lossy(&run.stderr)
    );
}
