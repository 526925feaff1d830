//! Compiles a small C program against the header and the static library.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "qfi.h"

int main(void) {
    QfiKickedTop *top = NULL;
    if (qfi_kicked_top_new(10.0, 1.5, 0.0, 2, &top) != QFI_STATUS_OK) return 1;
    double i = 0.0;
    if (qfi_kicked_top_exact(top, 0.0, 1.0, &i) != QFI_STATUS_OK) return 2;
    qfi_kicked_top_free(top);
    if (fabs(i - 80.0) > 1e-8) return 3;
    if (qfi_kicked_top_new(1.25, 1.5, 0.0, 2, &top) == QFI_STATUS_OK) return 4;
    if (qfi_last_error_message()[0] == '\0') return 5;
    if (qfi_kicked_top_exact(NULL, 0.0, 0.0, NULL) != QFI_STATUS_NULL_POINTER) return 6;
    printf("%s %.6f\n", qfi_version(), i);
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

fn have_cc() -> bool {
    Command::new("cc").arg("--version").output().is_ok()
}

#[test]
fn c_program_links_and_runs() {
    let lib = target_dir().join("libqfi_ffi.a");
    if !have_cc() || !lib.exists() {
        eprintln!("skipping: no C compiler or {} missing", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("client.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let bin = dir.path().join("client");
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "client exited with {:?}", out.status.code());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with(env!("CARGO_PKG_VERSION")), "{stdout}");
}
