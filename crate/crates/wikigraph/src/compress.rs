//! Transparent decompression for dump files, selected by file extension.
//!
//! Wikimedia distributes SQL dumps gzip-compressed, history shards either
//! gzip- or bzip2-compressed (sometimes as multistream archives), and
//! derived datasets uncompressed. `open_input` hides the difference.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Read};
use std::path::Path;

use bzip2::read::MultiBzDecoder;
use flate2::read::MultiGzDecoder;

/// Buffer size for the outer reader; dump lines can be tens of MB.
const BUF: usize = 1 << 16;

/// Open a file for reading, decompressing `.gz` and `.bz2` on the fly.
/// Any other extension is read as-is. Multistream archives are handled.
pub fn open_input(path: &Path) -> io::Result<Box<dyn BufRead + Send>> {
    let file = File::open(path)?;
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase());
    Ok(match ext.as_deref() {
        Some("gz") => boxed(MultiGzDecoder::new(BufReader::with_capacity(BUF, file))),
        Some("bz2") => boxed(MultiBzDecoder::new(BufReader::with_capacity(BUF, file))),
        _ => Box::new(BufReader::with_capacity(BUF, file)),
    })
}

fn boxed<R: Read + Send + 'static>(r: R) -> Box<dyn BufRead + Send> {
    Box::new(BufReader::with_capacity(BUF, r))
}
