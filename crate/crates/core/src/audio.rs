//! Container detection and duration probing for uploaded audio.
//!
//! Only headers are read: RIFF chunk sizes for WAV, frame headers for MP3,
//! page granule positions for Ogg (Vorbis and Opus). Nothing is decoded.

use crate::domain::AudioFormat;
use crate::error::{Error, ErrorCode, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProbedAudio {
    pub format: AudioFormat,
    pub duration_ms: u64,
}

/// Detects the container from magic bytes and returns its duration.
///
/// Fails with `ERR_TOO_LARGE` above `max_bytes`, `ERR_BAD_FORMAT` for
/// unrecognized data and `ERR_CORRUPT` when headers do not parse or the
/// duration rounds down to zero milliseconds.
pub fn validate_audio(bytes: &[u8], max_bytes: u64) -> Result<ProbedAudio> {
    if bytes.len() as u64 > max_bytes {
        return Err(Error::new(
            ErrorCode::TooLarge,
            format!("upload of {} bytes exceeds the {max_bytes} byte limit", bytes.len()),
        ));
    }
    let format = sniff(bytes).ok_or_else(|| {
        Error::new(ErrorCode::BadFormat, "not a WAV, MP3 or Ogg file")
    })?;
    let duration_ms = match format {
        AudioFormat::Wav => wav_duration_ms(bytes)?,
        AudioFormat::Mp3 => mp3_duration_ms(bytes)?,
        AudioFormat::Ogg => ogg_duration_ms(bytes)?,
    };
    if duration_ms == 0 {
        return Err(corrupt("audio has zero duration"));
    }
    Ok(ProbedAudio { format, duration_ms })
}

pub fn sniff(bytes: &[u8]) -> Option<AudioFormat> {
    if bytes.len() >= 12 && &bytes[0..4] == b"RIFF" && &bytes[8..12] == b"WAVE" {
        Some(AudioFormat::Wav)
    } else if bytes.starts_with(b"OggS") {
        Some(AudioFormat::Ogg)
    } else if bytes.starts_with(b"ID3") || Mp3Frame::parse(bytes).is_some() {
        Some(AudioFormat::Mp3)
    } else {
        None
    }
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::new(ErrorCode::Corrupt, msg)
}

fn u16_le(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_le(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

fn samples_to_ms(samples: u64, rate: u32) -> u64 {
    ((samples as u128 * 1000) / rate as u128) as u64
}

// ---- WAV ----

fn wav_duration_ms(bytes: &[u8]) -> Result<u64> {
    let mut pos = 12;
    let mut byte_rate = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_le(bytes, pos + 4) as usize;
        let body = pos + 8;
        match id {
            b"fmt " => {
                if size < 16 || body + 16 > bytes.len() {
                    return Err(corrupt("truncated fmt chunk"));
                }
                let rate = u32_le(bytes, body + 8);
                if rate == 0 || u16_le(bytes, body + 2) == 0 {
                    return Err(corrupt("fmt chunk declares zero channels or byte rate"));
                }
                byte_rate = Some(rate);
            }
            b"data" => {
                let rate = byte_rate.ok_or_else(|| corrupt("data chunk precedes fmt chunk"))?;
                // streamed files may leave the size unset; trust what arrived
                let available = bytes.len() - body;
                let data = size.min(available) as u64;
                return Ok(data * 1000 / rate as u64);
            }
            _ => {}
        }
        pos = body.saturating_add(size).saturating_add(size & 1);
    }
    Err(corrupt(if byte_rate.is_some() { "missing data chunk" } else { "missing fmt chunk" }))
}

/// Encodes interleaved 16-bit PCM samples as a canonical WAV file.
pub fn encode_wav_pcm16(sample_rate: u32, channels: u16, samples: &[i16]) -> Vec<u8> {
    let data_len = (samples.len() * 2) as u32;
    let block_align = channels * 2;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&channels.to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * block_align as u32).to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for s in samples {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

// ---- MP3 ----

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Mp3Frame {
    len: usize,
    samples: u32,
    sample_rate: u32,
    /// Offset of the Xing/Info tag inside the frame for layer III.
    side_info_end: usize,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum MpegVersion {
    V1,
    V2,
    V25,
}

impl Mp3Frame {
    fn parse(b: &[u8]) -> Option<Self> {
        if b.len() < 4 || b[0] != 0xFF || b[1] & 0xE0 != 0xE0 {
            return None;
        }
        let version = match (b[1] >> 3) & 0b11 {
            0b00 => MpegVersion::V25,
            0b10 => MpegVersion::V2,
            0b11 => MpegVersion::V1,
            _ => return None,
        };
        let layer = match (b[1] >> 1) & 0b11 {
            0b11 => 1,
            0b10 => 2,
            0b01 => 3,
            _ => return None,
        };
        let bitrate_idx = (b[2] >> 4) as usize;
        let rate_idx = ((b[2] >> 2) & 0b11) as usize;
        if bitrate_idx == 0 || bitrate_idx == 15 || rate_idx == 3 {
            return None;
        }
        let padding = ((b[2] >> 1) & 1) as u32;
        let mono = (b[3] >> 6) == 0b11;

        const V1_L1: [u32; 15] = [0, 32, 64, 96, 128, 160, 192, 224, 256, 288, 320, 352, 384, 416, 448];
        const V1_L2: [u32; 15] = [0, 32, 48, 56, 64, 80, 96, 112, 128, 160, 192, 224, 256, 320, 384];
        const V1_L3: [u32; 15] = [0, 32, 40, 48, 56, 64, 80, 96, 112, 128, 160, 192, 224, 256, 320];
        const V2_L1: [u32; 15] = [0, 32, 48, 56, 64, 80, 96, 112, 128, 144, 160, 176, 192, 224, 256];
        const V2_L23: [u32; 15] = [0, 8, 16, 24, 32, 40, 48, 56, 64, 80, 96, 112, 128, 144, 160];
        let kbps = match (version, layer) {
            (MpegVersion::V1, 1) => V1_L1,
            (MpegVersion::V1, 2) => V1_L2,
            (MpegVersion::V1, _) => V1_L3,
            (_, 1) => V2_L1,
            _ => V2_L23,
        }[bitrate_idx];
        let sample_rate = [44_100, 48_000, 32_000][rate_idx]
            / match version {
                MpegVersion::V1 => 1,
                MpegVersion::V2 => 2,
                MpegVersion::V25 => 4,
            };
        let bitrate = kbps * 1000;
        let (samples, len) = match (layer, version) {
            (1, _) => (384, (12 * bitrate / sample_rate + padding) * 4),
            (2, _) | (3, MpegVersion::V1) => (1152, 144 * bitrate / sample_rate + padding),
            _ => (576, 72 * bitrate / sample_rate + padding),
        };
        let side_info = match (version == MpegVersion::V1, mono) {
            (true, false) => 32,
            (true, true) => 17,
            (false, false) => 17,
            (false, true) => 9,
        };
        Some(Mp3Frame {
            len: len as usize,
            samples,
            sample_rate,
            side_info_end: if layer == 3 { 4 + side_info } else { 4 },
        })
    }
}

fn id3v2_len(b: &[u8]) -> Result<usize> {
    if b.len() < 10 {
        return Err(corrupt("truncated ID3 tag"));
    }
    let size = b[6..10].iter().try_fold(0usize, |acc, &x| {
        (x & 0x80 == 0).then_some((acc << 7) | x as usize)
    });
    let size = size.ok_or_else(|| corrupt("malformed ID3 tag size"))?;
    let footer = if b[5] & 0x10 != 0 { 10 } else { 0 };
    Ok(10 + size + footer)
}

fn mp3_duration_ms(bytes: &[u8]) -> Result<u64> {
    let mut pos = 0;
    while bytes[pos..].starts_with(b"ID3") {
        pos += id3v2_len(&bytes[pos..])?;
        if pos > bytes.len() {
            return Err(corrupt("ID3 tag runs past end of file"));
        }
    }
    // first sync whose successor (or end of file) also lines up
    let first = (pos..bytes.len().saturating_sub(3))
        .find(|&i| match Mp3Frame::parse(&bytes[i..]) {
            Some(f) => {
                let next = i + f.len;
                next == bytes.len() || Mp3Frame::parse(&bytes[next.min(bytes.len())..]).is_some()
            }
            None => false,
        })
        .ok_or_else(|| corrupt("no MPEG audio frames found"))?;

    let head = Mp3Frame::parse(&bytes[first..]).expect("found above");
    if let Some(frames) = xing_frame_count(&bytes[first..], &head) {
        return Ok(samples_to_ms(frames as u64 * head.samples as u64, head.sample_rate));
    }

    let mut samples = 0u64;
    let mut at = first;
    while let Some(frame) = bytes.get(at..).and_then(Mp3Frame::parse) {
        if frame.sample_rate != head.sample_rate {
            break;
        }
        if at + frame.len > bytes.len() {
            // a truncated final frame still carries its samples' worth of header
            break;
        }
        samples += frame.samples as u64;
        at += frame.len;
    }
    Ok(samples_to_ms(samples, head.sample_rate))
}

fn xing_frame_count(frame: &[u8], head: &Mp3Frame) -> Option<u32> {
    let tag = frame.get(head.side_info_end..head.side_info_end + 12)?;
    if &tag[0..4] != b"Xing" && &tag[0..4] != b"Info" {
        return None;
    }
    let flags = u32::from_be_bytes(tag[4..8].try_into().unwrap());
    (flags & 1 != 0).then(|| u32::from_be_bytes(tag[8..12].try_into().unwrap()))
}

// ---- Ogg ----

fn ogg_crc(data: &[u8]) -> u32 {
    static TABLE: std::sync::OnceLock<[u32; 256]> = std::sync::OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = [0u32; 256];
        for (i, slot) in t.iter_mut().enumerate() {
            let mut r = (i as u32) << 24;
            for _ in 0..8 {
                r = if r & 0x8000_0000 != 0 { (r << 1) ^ 0x04c1_1db7 } else { r << 1 };
            }
            *slot = r;
        }
        t
    });
    data.iter()
        .fold(0u32, |crc, &b| (crc << 8) ^ table[((crc >> 24) as u8 ^ b) as usize])
}

struct OggPage<'a> {
    granule: i64,
    serial: u32,
    body: &'a [u8],
    len: usize,
}

fn ogg_page(b: &[u8]) -> Result<OggPage<'_>> {
    if b.len() < 27 || !b.starts_with(b"OggS") {
        return Err(corrupt("expected Ogg page"));
    }
    if b[4] != 0 {
        return Err(corrupt("unsupported Ogg version"));
    }
    let segments = b[26] as usize;
    let header_len = 27 + segments;
    if b.len() < header_len {
        return Err(corrupt("truncated Ogg page header"));
    }
    let body_len: usize = b[27..header_len].iter().map(|&x| x as usize).sum();
    let len = header_len + body_len;
    if b.len() < len {
        return Err(corrupt("truncated Ogg page"));
    }
    let mut page = b[..len].to_vec();
    let stored_crc = u32_le(&page, 22);
    page[22..26].fill(0);
    if ogg_crc(&page) != stored_crc {
        return Err(corrupt("Ogg page checksum mismatch"));
    }
    Ok(OggPage {
        granule: i64::from_le_bytes(b[6..14].try_into().unwrap()),
        serial: u32_le(b, 14),
        body: &b[header_len..len],
        len,
    })
}

enum OggCodec {
    Vorbis { rate: u32 },
    Opus { pre_skip: u64 },
}

fn ogg_duration_ms(bytes: &[u8]) -> Result<u64> {
    let first = ogg_page(bytes)?;
    let id = first.body;
    let codec = if id.len() >= 16 && id.starts_with(b"\x01vorbis") {
        OggCodec::Vorbis { rate: u32_le(id, 12) }
    } else if id.len() >= 19 && id.starts_with(b"OpusHead") {
        OggCodec::Opus { pre_skip: u16_le(id, 10) as u64 }
    } else {
        return Err(Error::new(ErrorCode::BadFormat, "unsupported Ogg codec (expected Vorbis or Opus)"));
    };

    let serial = first.serial;
    let mut last_granule = None;
    let mut pos = 0;
    while pos < bytes.len() {
        let page = ogg_page(&bytes[pos..])?;
        if page.serial == serial && page.granule >= 0 {
            last_granule = Some(page.granule as u64);
        }
        pos += page.len;
    }
    let granule = last_granule.ok_or_else(|| corrupt("no Ogg page carries a granule position"))?;
    match codec {
        OggCodec::Vorbis { rate } if rate > 0 => Ok(samples_to_ms(granule, rate)),
        OggCodec::Vorbis { .. } => Err(corrupt("Vorbis header declares zero sample rate")),
        OggCodec::Opus { pre_skip } => Ok(samples_to_ms(granule.saturating_sub(pre_skip), 48_000)),
    }
}

/// Builds a single Ogg page around `body` (one packet, at most 255 lacing values).
pub fn ogg_page_bytes(header_type: u8, granule: i64, serial: u32, seq: u32, body: &[u8]) -> Vec<u8> {
    let mut lacing = vec![255u8; body.len() / 255];
    lacing.push((body.len() % 255) as u8);
    assert!(lacing.len() <= 255, "packet too large for one page");
    let mut page = Vec::with_capacity(27 + lacing.len() + body.len());
    page.extend_from_slice(b"OggS");
    page.push(0);
    page.push(header_type);
    page.extend_from_slice(&granule.to_le_bytes());
    page.extend_from_slice(&serial.to_le_bytes());
    page.extend_from_slice(&seq.to_le_bytes());
    page.extend_from_slice(&[0; 4]);
    page.push(lacing.len() as u8);
    page.extend_from_slice(&lacing);
    page.extend_from_slice(body);
    let crc = ogg_crc(&page);
    page[22..26].copy_from_slice(&crc.to_le_bytes());
    page
}
