use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

/// Files produced by one command, written only after the whole command
/// succeeded. Each file goes to a temporary sibling first and is renamed
/// into place, so readers never see a partial file.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(PathBuf, String)>,
}

impl Outputs {
    pub fn add(&mut self, relative: impl Into<PathBuf>, contents: String) {
        self.files.push((relative.into(), contents));
    }

    pub fn add_json<T: serde::Serialize>(&mut self, relative: impl Into<PathBuf>, value: &T) {
        let mut text = serde_json::to_string_pretty(value).expect("report types always serialize");
        text.push('\n');
        self.add(relative, text);
    }

    pub fn write_to(self, dir: &Path) -> CliResult<Vec<PathBuf>> {
        let mut written = Vec::with_capacity(self.files.len());
        for (relative, contents) in self.files {
            let path = dir.join(relative);
            let parent = path.parent().unwrap_or(dir);
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
            let mut tmp = tempfile::NamedTempFile::new_in(parent).map_err(|e| CliError::io(parent, e))?;
            tmp.write_all(contents.as_bytes()).map_err(|e| CliError::io(&path, e))?;
            // Temporary files are created owner-only; outputs are ordinary files.
            #[cfg(unix)]
            {
                use std::os::unix::fs::PermissionsExt;
                tmp.as_file()
                    .set_permissions(std::fs::Permissions::from_mode(0o644))
                    .map_err(|e| CliError::io(&path, e))?;
            }
            tmp.persist(&path).map_err(|e| CliError::io(&path, e.error))?;
            log::info!("wrote {}", path.display());
            written.push(path);
        }
        Ok(written)
    }
}

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}
