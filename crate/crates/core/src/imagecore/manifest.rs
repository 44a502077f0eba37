use std::collections::HashSet;
use std::fs::File;
use std::path::{Path, PathBuf};

use super::{io_err, Error, ImageTile, Result, Split, TileMeta};

/// Required manifest columns, in canonical order.
pub const MANIFEST_COLUMNS: [&str; 6] = ["tile_path", "patient_id", "slide_id", "domain_id", "label", "split"];

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    /// Path exactly as written in the manifest.
    pub tile_path: String,
    /// `tile_path` resolved against the manifest's directory.
    pub resolved: PathBuf,
    pub meta: TileMeta,
    /// Values of any non-standard columns, aligned with [`Manifest::extra_columns`].
    pub extra: Vec<String>,
}

/// Ordered list of tiles with provenance metadata.
///
/// The tile id of an entry is the file stem of its path, so two entries whose
/// files share a stem are rejected even when their directories differ.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    base_dir: PathBuf,
    extra_columns: Vec<String>,
    entries: Vec<ManifestEntry>,
}

/// Reads a manifest CSV. Every referenced tile must exist; on any error no
/// manifest is returned.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let idx: Vec<usize> = MANIFEST_COLUMNS.iter().map(|c| column(c)).collect::<Result<_>>()?;
    let extra_idx: Vec<usize> = (0..headers.len()).filter(|i| !idx.contains(i)).collect();

    let mut manifest = Manifest {
        base_dir: base_dir.clone(),
        extra_columns: extra_idx.iter().map(|&i| headers[i].trim().to_string()).collect(),
        entries: Vec::new(),
    };
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| record.get(idx[i]).unwrap_or("").trim().to_string();
        let tile_path = field(0);
        if tile_path.is_empty() {
            return Err(Error::BadRow {
                line,
                message: "empty tile_path".into(),
            });
        }
        let label_text = field(4);
        let label = match label_text.as_str() {
            "0" => 0,
            "1" => 1,
            _ => return Err(Error::BadLabel { line, value: label_text }),
        };
        let split_text = field(5);
        let split: Split = split_text
            .parse()
            .map_err(|_| Error::BadSplit { line, value: split_text })?;
        let resolved = base_dir.join(&tile_path);
        if !resolved.is_file() {
            return Err(Error::UnresolvablePath(resolved));
        }
        let tile_id = tile_id_from_path(&tile_path);
        if !seen.insert(tile_id.clone()) {
            return Err(Error::DuplicateTileId(tile_id));
        }
        manifest.entries.push(ManifestEntry {
            tile_path,
            resolved,
            meta: TileMeta {
                tile_id,
                patient_id: field(1),
                slide_id: field(2),
                domain_id: field(3),
                label,
                split,
            },
            extra: extra_idx.iter().map(|&i| record.get(i).unwrap_or("").to_string()).collect(),
        });
    }
    Ok(manifest)
}

/// File stem of a manifest path, used as the tile id.
pub fn tile_id_from_path(tile_path: &str) -> String {
    Path::new(tile_path)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| tile_path.to_string())
}

impl Manifest {
    /// Empty manifest whose relative paths resolve against `base_dir`.
    pub fn new(base_dir: impl Into<PathBuf>, extra_columns: Vec<String>) -> Self {
        Self {
            base_dir: base_dir.into(),
            extra_columns,
            entries: Vec::new(),
        }
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn extra_columns(&self) -> &[String] {
        &self.extra_columns
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Appends an entry whose path is relative to the manifest directory.
    /// Missing extra values are filled with empty strings.
    pub fn push(&mut self, tile_path: impl Into<String>, meta: TileMeta, mut extra: Vec<String>) -> Result<()> {
        let tile_path = tile_path.into();
        if self.entries.iter().any(|e| e.meta.tile_id == meta.tile_id) {
            return Err(Error::DuplicateTileId(meta.tile_id));
        }
        extra.resize(self.extra_columns.len(), String::new());
        self.entries.push(ManifestEntry {
            resolved: self.base_dir.join(&tile_path),
            tile_path,
            meta,
            extra,
        });
        Ok(())
    }

    pub fn sort_by_tile_id(&mut self) {
        self.entries.sort_by(|a, b| a.meta.tile_id.cmp(&b.meta.tile_id));
    }

    /// Loads an entry's PNG and attaches its metadata.
    pub fn load_tile(&self, entry: &ManifestEntry) -> Result<ImageTile> {
        Ok(ImageTile::load_png(&entry.resolved)?.with_meta(entry.meta.clone()))
    }

    /// Canonical CSV text: required columns in standard order followed by the
    /// extra columns, LF line endings, minimal quoting.
    pub fn to_csv_string(&self) -> String {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let header: Vec<&str> = MANIFEST_COLUMNS
            .iter()
            .copied()
            .chain(self.extra_columns.iter().map(String::as_str))
            .collect();
        // Writing to a Vec cannot fail.
        writer.write_record(&header).expect("in-memory write");
        for e in &self.entries {
            let label = e.meta.label.to_string();
            let mut row = vec![
                e.tile_path.as_str(),
                e.meta.patient_id.as_str(),
                e.meta.slide_id.as_str(),
                e.meta.domain_id.as_str(),
                label.as_str(),
                e.meta.split.as_str(),
            ];
            row.extend(e.extra.iter().map(String::as_str));
            writer.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string()).map_err(io_err(path))
    }
}
