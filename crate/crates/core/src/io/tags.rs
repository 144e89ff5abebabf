use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian, WriteBytesExt};

use crate::error::{FormatError, Result};
use crate::stream::TimeTagStream;

pub const TAG_MAGIC: [u8; 4] = *b"TTG1";
pub const TAG_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 20;

/// Fixed 20-byte header of a tag file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TagFileHeader {
    pub version: u16,
    pub tick_resolution_fs: u64,
}

impl TagFileHeader {
    pub fn new(tick_resolution_fs: u64) -> Self {
        TagFileHeader { version: TAG_VERSION, tick_resolution_fs }
    }

    pub fn to_bytes(self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[..4].copy_from_slice(&TAG_MAGIC);
        LittleEndian::write_u16(&mut b[4..6], self.version);
        LittleEndian::write_u64(&mut b[6..14], self.tick_resolution_fs);
        b
    }

    pub fn parse(b: &[u8; HEADER_LEN]) -> std::result::Result<Self, FormatError> {
        let found: [u8; 4] = b[..4].try_into().expect("4 bytes");
        if found != TAG_MAGIC {
            return Err(FormatError::BadMagic { found });
        }
        let version = LittleEndian::read_u16(&b[4..6]);
        if version != TAG_VERSION {
            return Err(FormatError::UnsupportedVersion(version));
        }
        let tick_resolution_fs = LittleEndian::read_u64(&b[6..14]);
        if tick_resolution_fs == 0 {
            return Err(FormatError::ZeroResolution);
        }
        if b[14..].iter().any(|&x| x != 0) {
            return Err(FormatError::ReservedNonZero);
        }
        Ok(TagFileHeader { version, tick_resolution_fs })
    }
}

pub fn write_tags_to<W: Write>(stream: &TimeTagStream, mut out: W) -> Result<()> {
    out.write_all(&TagFileHeader::new(stream.tick_resolution_fs()).to_bytes())?;
    for &t in stream.ticks() {
        out.write_u64::<LittleEndian>(t)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_tags(stream: &TimeTagStream, path: impl AsRef<Path>) -> Result<()> {
    write_tags_to(stream, BufWriter::new(File::create(path)?))
}

/// Decodes a complete tag file held in memory.
pub fn parse_tags(bytes: &[u8]) -> Result<TimeTagStream> {
    let len = bytes.len() as u64;
    let header: &[u8; HEADER_LEN] = bytes
        .get(..HEADER_LEN)
        .and_then(|h| h.try_into().ok())
        .ok_or(FormatError::Truncated { len, detail: "shorter than the 20-byte header" })?;
    let header = TagFileHeader::parse(header)?;
    let payload = &bytes[HEADER_LEN..];
    if !payload.len().is_multiple_of(8) {
        return Err(FormatError::Truncated { len, detail: "payload is not a whole number of 8-byte ticks" }.into());
    }
    let mut ticks = vec![0u64; payload.len() / 8];
    LittleEndian::read_u64_into(payload, &mut ticks);
    if let Some(i) = crate::stream::first_non_increasing(&ticks) {
        return Err(FormatError::NonMonotonic { byte_offset: (HEADER_LEN + 8 * i) as u64 }.into());
    }
    TimeTagStream::new(header.tick_resolution_fs, ticks)
}

pub fn read_tags(path: impl AsRef<Path>) -> Result<TimeTagStream> {
    parse_tags(&std::fs::read(path)?)
}

/// Incremental reader handing out ticks in bounded chunks. Monotonicity is
/// checked across chunk boundaries.
pub struct TagReader<R> {
    inner: R,
    header: TagFileHeader,
    offset: u64,
    last: Option<u64>,
    buf: Vec<u8>,
}

impl TagReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        TagReader::new(BufReader::new(File::open(path)?))
    }
}

/// Reads until `buf` is full or the source is exhausted.
fn fill<R: Read>(r: &mut R, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut got = 0;
    while got < buf.len() {
        match r.read(&mut buf[got..]) {
            Ok(0) => break,
            Ok(n) => got += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(got)
}

impl<R: Read> TagReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let mut h = [0u8; HEADER_LEN];
        let got = fill(&mut inner, &mut h)?;
        if got < HEADER_LEN {
            return Err(FormatError::Truncated { len: got as u64, detail: "shorter than the 20-byte header" }.into());
        }
        let header = TagFileHeader::parse(&h)?;
        Ok(TagReader { inner, header, offset: HEADER_LEN as u64, last: None, buf: Vec::new() })
    }

    pub fn header(&self) -> TagFileHeader {
        self.header
    }

    /// Next chunk of at most `max_ticks` ticks, or `None` at end of file.
    pub fn next_chunk(&mut self, max_ticks: usize) -> Result<Option<Vec<u64>>> {
        self.buf.resize(max_ticks.max(1) * 8, 0);
        let got = fill(&mut self.inner, &mut self.buf)?;
        if got % 8 != 0 {
            return Err(FormatError::Truncated {
                len: self.offset + got as u64,
                detail: "payload is not a whole number of 8-byte ticks",
            }
            .into());
        }
        if got == 0 {
            return Ok(None);
        }
        let mut ticks = vec![0u64; got / 8];
        LittleEndian::read_u64_into(&self.buf[..got], &mut ticks);
        for (i, &t) in ticks.iter().enumerate() {
            if self.last.is_some_and(|prev| t <= prev) {
                return Err(FormatError::NonMonotonic { byte_offset: self.offset + 8 * i as u64 }.into());
            }
            self.last = Some(t);
        }
        self.offset += got as u64;
        Ok(Some(ticks))
    }
}
