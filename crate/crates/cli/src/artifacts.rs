//! Output layout and atomic file I/O.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use esprd_core::experiment::Discriminator;
use esprd_core::{Dataset, Error, FnnModel, Result, ScalerParams, TrainedModel};

pub const OUT_DIR_ENV: &str = "ESPRD_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "esprd-out";

/// Fixed layout below the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn dataset(&self) -> PathBuf {
        self.root.join("dataset.csv")
    }
    pub fn prep_dir(&self) -> PathBuf {
        self.root.join("prep")
    }
    pub fn split(&self, part: &str) -> PathBuf {
        self.prep_dir().join(format!("{part}.csv"))
    }
    pub fn scaler(&self) -> PathBuf {
        self.prep_dir().join("scaler.json")
    }
    pub fn prep_summary(&self) -> PathBuf {
        self.prep_dir().join("summary.json")
    }
    pub fn models_dir(&self) -> PathBuf {
        self.root.join("models")
    }
    pub fn model(&self, name: &str) -> PathBuf {
        if name == "fnn" {
            self.models_dir().join("fnn.ckpt")
        } else {
            self.models_dir().join(format!("{name}.json"))
        }
    }
    pub fn timing(&self) -> PathBuf {
        self.models_dir().join("timing.json")
    }
    pub fn reports_dir(&self) -> PathBuf {
        self.root.join("reports")
    }
    pub fn report(&self, name: &str) -> PathBuf {
        self.reports_dir().join(format!("{name}.json"))
    }
    pub fn surfaces_dir(&self) -> PathBuf {
        self.root.join("surfaces")
    }
    pub fn histograms_dir(&self) -> PathBuf {
        self.root.join("histograms")
    }
}

/// Write through a temp file in the target directory, then rename into place.
pub fn write_atomic(path: &Path, contents: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<u64> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        contents(&mut w)?;
        w.flush()?;
    }
    tmp.as_file().sync_all()?;
    let file = tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(file.metadata()?.len())
}

pub fn write_text(path: &Path, text: &str) -> Result<u64> {
    write_atomic(path, |w| Ok(w.write_all(text.as_bytes())?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

pub fn write_dataset(path: &Path, ds: &Dataset) -> Result<u64> {
    write_atomic(path, |w| ds.write_to(w))
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    Dataset::read_from(open(path)?)
}

pub fn read_scaler(path: &Path) -> Result<ScalerParams> {
    ScalerParams::from_json(&read_text(path)?)
}

pub fn write_model(layout: &Layout, model: &Discriminator) -> Result<u64> {
    let path = layout.model(model.name());
    match model {
        Discriminator::Classical(m) => write_text(&path, &m.to_json()),
        Discriminator::Neural(m) => write_atomic(&path, |w| m.write_checkpoint(w)),
    }
}

pub fn read_model(layout: &Layout, name: &str) -> Result<Discriminator> {
    let path = layout.model(name);
    if name == "fnn" {
        Ok(Discriminator::Neural(FnnModel::read_checkpoint(open(&path)?)?))
    } else {
        Ok(Discriminator::Classical(TrainedModel::from_json(&read_text(&path)?)?))
    }
}
