//! Capture-time extraction from embedded photo metadata or sidecar text.
//!
//! Timestamps are naive local times interpreted as UTC; any zone suffix is
//! ignored so that two photos from the same camera compare as recorded.

use std::io::Cursor;
use std::path::Path;

use chrono::NaiveDateTime;

#[derive(Debug, Clone, Copy)]
pub enum MetadataBlob<'a> {
    Bytes(&'a [u8]),
    Text(&'a str),
}

const FORMATS: [&str; 3] = ["%Y:%m:%d %H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S"];

const KEYS: [&str; 3] = ["datetimeoriginal", "datetimedigitized", "datetime"];

pub fn parse_timestamp(blob: MetadataBlob<'_>) -> Option<i64> {
    match blob {
        MetadataBlob::Bytes(b) => parse_timestamp_bytes(b),
        MetadataBlob::Text(t) => parse_timestamp_text(t),
    }
}

/// Seconds since the epoch for a bare `YYYY:MM:DD HH:MM:SS` value (also
/// accepting `-` date separators and a `T` separator), or a sidecar whose
/// lines hold `key=value` or `key: value` with a date-time key.
pub fn parse_timestamp_text(text: &str) -> Option<i64> {
    if let Some(t) = parse_value(text) {
        return Some(t);
    }
    for key in KEYS {
        for line in text.lines() {
            let Some((k, v)) = line.split_once(['=', ':', '\t']) else {
                continue;
            };
            let k: String = k
                .chars()
                .filter(|c| c.is_ascii_alphanumeric())
                .collect::<String>()
                .to_ascii_lowercase();
            if k == key {
                if let Some(t) = parse_value(v.trim().trim_matches('"')) {
                    return Some(t);
                }
            }
        }
    }
    None
}

fn parse_value(s: &str) -> Option<i64> {
    let s = s.trim().trim_matches('\0');
    let head = s.get(..19)?;
    let tail = &s[19..];
    let tail_ok = tail.is_empty()
        || tail.starts_with('.')
        || tail.starts_with('Z')
        || tail.starts_with('+')
        || tail.starts_with('-')
        || tail.starts_with(' ');
    if !tail_ok {
        return None;
    }
    FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(head, f).ok())
        .map(|dt| dt.and_utc().timestamp())
}

/// Reads EXIF from an image container or raw TIFF block; falls back to
/// interpreting the bytes as sidecar text.
pub fn parse_timestamp_bytes(bytes: &[u8]) -> Option<i64> {
    if bytes.is_empty() {
        return None;
    }
    let reader = exif::Reader::new();
    let parsed = reader
        .read_from_container(&mut Cursor::new(bytes))
        .or_else(|_| reader.read_raw(bytes.to_vec()));
    if let Ok(ex) = parsed {
        for tag in [exif::Tag::DateTimeOriginal, exif::Tag::DateTimeDigitized, exif::Tag::DateTime] {
            let Some(field) = ex.get_field(tag, exif::In::PRIMARY) else {
                continue;
            };
            if let exif::Value::Ascii(parts) = &field.value {
                if let Some(t) = parts
                    .iter()
                    .find_map(|p| std::str::from_utf8(p).ok().and_then(parse_value))
                {
                    return Some(t);
                }
            }
        }
        return None;
    }
    std::str::from_utf8(bytes).ok().and_then(parse_timestamp_text)
}

/// Capture time of an image file, or `None` if unreadable or absent.
pub fn image_timestamp(path: &Path) -> Option<i64> {
    std::fs::read(path).ok().and_then(|b| parse_timestamp_bytes(&b))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    /// A minimal JPEG carrying an EXIF block with the given DateTimeOriginal.
    pub(crate) fn jpeg_with_exif(datetime: &str) -> Vec<u8> {
        let field = exif::Field {
            tag: exif::Tag::DateTimeOriginal,
            ifd_num: exif::In::PRIMARY,
            value: exif::Value::Ascii(vec![datetime.as_bytes().to_vec()]),
        };
        let mut w = exif::experimental::Writer::new();
        w.push_field(&field);
        let mut tiff = Cursor::new(Vec::new());
        w.write(&mut tiff, true).unwrap();
        let tiff = tiff.into_inner();
        let mut out = vec![0xFF, 0xD8, 0xFF, 0xE1];
        let len = (2 + 6 + tiff.len()) as u16;
        out.extend_from_slice(&len.to_be_bytes());
        out.extend_from_slice(b"Exif\0\0");
        out.extend_from_slice(&tiff);
        out.extend_from_slice(&[0xFF, 0xD9]);
        out
    }

    #[test]
    fn calendar_arithmetic() {
        // 2019-07-14 is day 18091 after 1970-01-01.
        let expected = 18091 * 86400 + 10 * 3600;
        assert_eq!(parse_timestamp_text("2019:07:14 10:00:00"), Some(expected));
        assert_eq!(parse_timestamp_text("2019-07-14T10:00:00"), Some(expected));
        assert_eq!(parse_timestamp_text("2019-07-14 10:00:00+02:00"), Some(expected));
        let a = parse_timestamp_text("2019:07:14 12:59:59").unwrap();
        let b = parse_timestamp_text("2019:07:14 13:00:01").unwrap();
        assert_eq!((a - expected, b - expected), (10799, 10801));
    }

    #[test]
    fn absent_or_malformed() {
        assert_eq!(parse_timestamp(MetadataBlob::Text("")), None);
        assert_eq!(parse_timestamp(MetadataBlob::Bytes(&[])), None);
        assert_eq!(parse_timestamp_text("0000:00:00 00:00:00"), None);
        assert_eq!(parse_timestamp_text("2019:13:01 00:00:00"), None);
        assert_eq!(parse_timestamp_text("2019:07:14 10:00:00abc"), None);
    }

    #[test]
    fn sidecar_lines() {
        let text = "name=IMG_1.jpg\nDateTimeOriginal=2019:07:14 10:00:00\n";
        assert_eq!(parse_timestamp_text(text), Some(18091 * 86400 + 36000));
        let yaml = "Model: X\nDate/Time Original: 2020:01:01 00:00:00\n";
        assert_eq!(parse_timestamp_text(yaml), Some(18262 * 86400));
    }

    #[test]
    fn exif_in_jpeg() {
        let bytes = jpeg_with_exif("2019:07:14 10:00:00");
        assert_eq!(parse_timestamp_bytes(&bytes), Some(18091 * 86400 + 36000));
        assert_eq!(parse_timestamp_bytes(&jpeg_with_exif("garbage")), None);
    }

    proptest! {
        #[test]
        fn fuzzed_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
            let _ = parse_timestamp_bytes(&bytes);
        }

        #[test]
        fn fuzzed_text_never_panics(s in "\\PC{0,40}") {
            let _ = parse_timestamp_text(&s);
        }

        #[test]
        fn mutated_timestamps_never_panic(s in "[0-9:T\\- ]{0,24}") {
            let _ = parse_timestamp_text(&s);
        }
    }
}
