// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

/// A throwaway workspace driven through the `socbuild` binary.
pub struct Ws {
    dir: TempDir,
}

impl Ws {
    pub fn new() -> Ws {
        Ws {
            dir: tempfile::tempdir().expect("tempdir"),
        }
    }

    pub fn root(&self) -> &Path {
        self.dir.path()
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root().join(rel)
    }

    pub fn write(&self, rel: &str, body: impl AsRef<[u8]>) -> PathBuf {
        let p = self.path(rel);
        std::fs::create_dir_all(p.parent().unwrap()).unwrap();
        std::fs::write(&p, body).unwrap();
        p
    }

    pub fn read(&self, rel: &str) -> Vec<u8> {
        std::fs::read(self.path(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
    }

    pub fn cmd(&self, args: &[&str]) -> Command {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_socbuild"));
        cmd.arg("--workspace")
            .arg(self.root())
            .args(args)
            .env_remove("SOCBUILD_OFFLINE")
            .env_remove("SOCBUILD_CACHE");
        cmd
    }

    pub fn run(&self, args: &[&str]) -> Run {
        Run(self.cmd(args).output().expect("spawn socbuild"))
    }

    /// Diamond: top links b and c, both link d; one Verilog file each.
    pub fn diamond(&self) {
        for (n, links) in [
            ("top", r#"["v::l::b", "v::l::c"]"#),
            ("b", r#"["v::l::d"]"#),
            ("c", r#"["v::l::d"]"#),
            ("d", "[]"),
        ] {
            self.write(&format!("{n}/{n}.v"), format!("module {n}; endmodule\n"));
            self.write(
                &format!("{n}/ip.json"),
                format!(r#"{{"ip": "v::l::{n}::1.0.0", "sources": {{"verilog": ["{n}.v"]}}, "links": {links}}}"#),
            );
        }
    }
}

pub struct Run(pub Output);

impl Run {
    pub fn code(&self) -> i32 {
        self.0.status.code().unwrap_or(-1)
    }

    pub fn stdout(&self) -> String {
        String::from_utf8_lossy(&self.0.stdout).into_owned()
    }

    pub fn stderr(&self) -> String {
        String::from_utf8_lossy(&self.0.stderr).into_owned()
    }

    pub fn describe(&self) -> String {
        format!(
            "exit {}\nstdout:\n{}stderr:\n{}",
            self.code(),
            self.stdout(),
            self.stderr()
        )
    }
}

pub fn git(dir: &Path, args: &[&str]) -> String {
    let out = Command::new("git")
        .args([
            "-c",
            "user.name=t",
            "-c",
            "user.email=t@t",
            "-c",
            "init.defaultBranch=main",
        ])
        .args(args)
        .current_dir(dir)
        .output()
        .expect("git is installed");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap().trim().to_string()
}

/// Gzipped tarball with every entry under `top/`.
pub fn tarball(path: &Path, top: &str, files: &[(&str, &str)]) {
    let gz = flate2::write::GzEncoder::new(std::fs::File::create(path).unwrap(), flate2::Compression::default());
    let mut builder = tar::Builder::new(gz);
    for (name, body) in files {
        let mut header = tar::Header::new_gnu();
        header.set_size(body.len() as u64);
        header.set_mode(0o644);
        header.set_cksum();
        builder
            .append_data(&mut header, format!("{top}/{name}"), body.as_bytes())
            .unwrap();
    }
    builder.into_inner().unwrap().finish().unwrap();
}
