use std::process::Command;

fn git(args: &[&str]) -> Option<String> {
    let out = Command::new("git").args(args).output().ok()?;
    if !out.status.success() {
        return None;
    }
    let s = String::from_utf8(out.stdout).ok()?.trim().to_string();
    (!s.is_empty()).then_some(s)
}

fn main() {
    let pkg = env!("CARGO_PKG_VERSION");
    let version = match git(&["describe", "--tags", "--always", "--dirty"]) {
        Some(d) if d.starts_with('v') => d,
        Some(hash) => format!("v{pkg}-g{hash}"),
        None => format!("v{pkg}"),
    };
    println!("cargo:rustc-env=FKCOUPLE_VERSION={version}");
    println!("cargo:rerun-if-changed=../../.git/HEAD");
    println!("cargo:rerun-if-changed=../../.git/index");
    println!("cargo:rerun-if-env-changed=FKCOUPLE_VERSION");
}
