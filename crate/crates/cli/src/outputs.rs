use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use jinv_core::ImageGrid;

/// Files written by the current command; removed again if it fails.
pub struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
    quiet: bool,
}

impl Outputs {
    pub fn new(dir: &Path, quiet: bool) -> anyhow::Result<Self> {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            quiet,
        })
    }

    pub fn write_with(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> jinv_core::Result<()>,
    ) -> anyhow::Result<PathBuf> {
        let path = self.dir.join(name);
        self.written.push(path.clone());
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(file);
        body(&mut w).with_context(|| format!("writing {}", path.display()))?;
        w.flush()
            .with_context(|| format!("writing {}", path.display()))?;
        if !self.quiet {
            eprintln!("wrote {}", path.display());
        }
        Ok(path)
    }

    pub fn image(&mut self, name: &str, img: &ImageGrid) -> anyhow::Result<PathBuf> {
        self.write_with(name, |w| jinv_core::pgm::write_pgm(w, img))
    }

    pub fn text(&mut self, name: &str, text: &str) -> anyhow::Result<PathBuf> {
        self.write_with(name, |w| Ok(w.write_all(text.as_bytes())?))
    }

    pub fn discard(self) {
        for p in self.written {
            let _ = fs::remove_file(p);
        }
    }
}
