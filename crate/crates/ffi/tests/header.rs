use std::path::Path;
use std::process::Command;

fn root() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn header_declares_every_export() {
    let src = std::fs::read_to_string(root().join("src/lib.rs")).unwrap();
    let header = std::fs::read_to_string(root().join("include/indexlab.h")).unwrap();
    let names: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .filter_map(|rest| rest.split('(').next())
        .collect();
    assert!(names.len() > 20, "{names:?}");
    for n in names {
        assert!(header.contains(&format!(" {n}(")) || header.contains(&format!("*{n}(")), "{n} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(status) = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", "-"])
        .stdin(std::process::Stdio::piped())
        .spawn()
        .and_then(|mut child| {
            use std::io::Write;
            let h = root().join("include/indexlab.h");
            writeln!(child.stdin.take().unwrap(), "#include \"{}\"\nint main(void) {{ return ix_version() == 0; }}", h.display())?;
            child.wait()
        })
    else {
        eprintln!("no C compiler; skipped");
        return;
    };
    assert!(status.success());
}
