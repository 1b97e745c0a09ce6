//! Image-folder layout: `root/<class_name>/<image files>`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::dataset::{Dataset, Sample, SampleId};
use super::image::Image;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg", "bmp"];

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::DatasetFormat {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        .unwrap_or(false)
}

/// Loads `root/<class>/<file>` with labels assigned by sorted class-directory name.
/// Images are converted to RGB, resized to `image_size` and scaled to `[0, 1]`.
pub fn load_image_folder<T: Scalar>(root: &Path, image_size: (usize, usize)) -> Result<Dataset<T>> {
    if !root.is_dir() {
        return Err(format_err(root, "dataset root does not exist or is not a directory"));
    }
    let class_dirs: Vec<PathBuf> = sorted_entries(root)?.into_iter().filter(|p| p.is_dir()).collect();
    if class_dirs.is_empty() {
        return Err(format_err(root, "no class subdirectories"));
    }
    let tag = root
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "folder".into());

    let (h, w) = image_size;
    let mut samples = Vec::new();
    let mut names = Vec::with_capacity(class_dirs.len());
    for (label, dir) in class_dirs.iter().enumerate() {
        let name = dir.file_name().unwrap().to_string_lossy().into_owned();
        let files: Vec<PathBuf> = sorted_entries(dir)?.into_iter().filter(|p| is_image(p)).collect();
        if files.is_empty() {
            return Err(format_err(dir, "class directory contains no images"));
        }
        for file in files {
            let img = image::open(&file).map_err(|source| Error::Image {
                path: file.clone(),
                source,
            })?;
            let rgb = img.to_rgb32f();
            let loaded = Image::<T>::from_fn(
                rgb.height() as usize,
                rgb.width() as usize,
                3,
                |y, x, c| T::c(rgb.get_pixel(x as u32, y as u32)[c] as f64),
            );
            let stem = file.file_stem().unwrap().to_string_lossy();
            samples.push(Sample::plain(
                SampleId::new(format!("{tag}/{name}/{stem}")),
                loaded.resize(h, w),
                Some(label),
            ));
        }
        names.push(name);
    }
    Ok(Dataset::new(samples, names.len(), 10, tag)?.with_class_names(names))
}

fn file_stem_for(id: &SampleId) -> String {
    id.0.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

pub fn save_png<T: Scalar>(img: &Image<T>, path: &Path) -> Result<()> {
    let (h, w, c) = img.dims();
    let buf = image::RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let px = |ch: usize| (img.get(y as usize, x as usize, ch.min(c - 1)).f64() * 255.0).round() as u8;
        image::Rgb([px(0), px(1), px(2)])
    });
    buf.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes a dataset in the image-folder layout. Unlabeled samples go to
/// `root/unlabeled/`. When `manifest` is given, one JSON record per line is
/// written to `root/manifest.jsonl`.
pub fn export_image_folder<T: Scalar, R: Serialize>(
    ds: &Dataset<T>,
    root: &Path,
    manifest: Option<&[R]>,
) -> Result<()> {
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    for s in &ds.samples {
        let dir = match s.goal_label {
            Some(y) => root.join(&ds.class_names[y]),
            None => root.join("unlabeled"),
        };
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        save_png(&s.image, &dir.join(format!("{}.png", file_stem_for(&s.id))))?;
    }
    if let Some(records) = manifest {
        let path = root.join("manifest.jsonl");
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = BufWriter::new(file);
        for r in records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
        }
        out.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_png(path: &Path, v: u8) {
        image::RgbImage::from_pixel(8, 8, image::Rgb([v, v, v])).save(path).unwrap();
    }

    #[test]
    fn labels_follow_sorted_directory_names() {
        let dir = tempfile::tempdir().unwrap();
        for class in ["dog", "cat"] {
            let d = dir.path().join(class);
            fs::create_dir(&d).unwrap();
            for i in 0..3 {
                write_png(&d.join(format!("{i}.png")), 10 * i as u8);
            }
        }
        let ds: Dataset<f32> = load_image_folder(dir.path(), (32, 32)).unwrap();
        assert_eq!(ds.len(), 6);
        assert_eq!(ds.goal_classes, 2);
        assert_eq!(ds.class_names, vec!["cat", "dog"]);
        assert!(ds.samples[..3].iter().all(|s| s.goal_label == Some(0)));
        assert!(ds.samples[3..].iter().all(|s| s.goal_label == Some(1)));
        assert_eq!(ds.samples[0].image.dims(), (32, 32, 3));
        assert!(ds.warnings.is_empty());
    }

    #[test]
    fn empty_root_and_empty_class_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_image_folder::<f32>(dir.path(), (32, 32)).unwrap_err();
        assert!(matches!(err, Error::DatasetFormat { .. }));

        let empty = dir.path().join("empty_class");
        fs::create_dir(&empty).unwrap();
        match load_image_folder::<f32>(dir.path(), (32, 32)).unwrap_err() {
            Error::DatasetFormat { path, .. } => assert_eq!(path, empty),
            other => panic!("unexpected {other}"),
        }
        assert!(load_image_folder::<f32>(&dir.path().join("nope"), (32, 32)).is_err());
    }

    #[test]
    fn sixty_five_classes() {
        let dir = tempfile::tempdir().unwrap();
        for c in 0..65 {
            let d = dir.path().join(format!("c{c:02}"));
            fs::create_dir(&d).unwrap();
            write_png(&d.join("a.png"), 100);
        }
        let ds: Dataset<f32> = load_image_folder(dir.path(), (32, 32)).unwrap();
        assert_eq!(ds.goal_classes, 65);
    }

    #[test]
    fn export_round_trips_through_loader() {
        let dir = tempfile::tempdir().unwrap();
        let samples = (0..4)
            .map(|i| {
                Sample::plain(
                    SampleId::new(format!("s/{i}")),
                    Image::<f32>::from_fn(32, 32, 3, |_, _, _| 0.5),
                    Some(i % 2),
                )
            })
            .collect();
        let ds = Dataset::new(samples, 2, 10, "toy").unwrap();
        export_image_folder::<f32, ()>(&ds, dir.path(), None).unwrap();
        let back: Dataset<f32> = load_image_folder(dir.path(), (32, 32)).unwrap();
        assert_eq!(back.len(), 4);
        assert_eq!(back.goal_label_counts(), vec![2, 2]);
    }
}
