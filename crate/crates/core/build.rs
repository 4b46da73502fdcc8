use std::process::Command;

fn main() {
    let fallback = format!("v{}", env!("CARGO_PKG_VERSION"));
    let described = Command::new("git")
        .args(["describe", "--tags", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty());
    let version = match described {
        Some(d) if d.starts_with('v') => d,
        Some(d) => format!("{fallback}-g{d}"),
        None => fallback,
    };
    println!("cargo:rustc-env=HEXNLS_VERSION={version}");
    println!("cargo:rerun-if-changed=../../.git/HEAD");
}
