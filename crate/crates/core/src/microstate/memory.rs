use thiserror::Error;

use crate::isa::Word;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum MemError {
    #[error("misaligned word address {0}")]
    Misaligned(i64),
    #[error("address {addr} outside memory of {size} bytes")]
    OutOfRange { addr: i64, size: usize },
}

/// Byte-addressed, zero-initialized data memory accessed in 4-byte words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataMemory {
    words: Vec<Word>,
}

impl DataMemory {
    pub fn new(bytes: usize) -> Self {
        DataMemory { words: vec![0; bytes / 4] }
    }

    pub fn size_bytes(&self) -> usize {
        self.words.len() * 4
    }

    /// Validates an effective address and returns the word index.
    pub fn check(&self, addr: i64) -> Result<usize, MemError> {
        if addr < 0 || addr as usize + 4 > self.size_bytes() {
            return Err(MemError::OutOfRange { addr, size: self.size_bytes() });
        }
        if addr % 4 != 0 {
            return Err(MemError::Misaligned(addr));
        }
        Ok(addr as usize / 4)
    }

    pub fn read(&self, addr: i64) -> Result<Word, MemError> {
        Ok(self.words[self.check(addr)?])
    }

    pub fn write(&mut self, addr: i64, value: Word) -> Result<(), MemError> {
        let i = self.check(addr)?;
        self.words[i] = value;
        Ok(())
    }

    /// `(byte address, value)` of every non-zero word.
    pub fn nonzero(&self) -> impl Iterator<Item = (u32, Word)> + '_ {
        self.words
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != 0)
            .map(|(i, &w)| (i as u32 * 4, w))
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn untouched_reads_zero() {
        assert_eq!(DataMemory::new(1024).read(256), Ok(0));
    }

    #[test]
    fn write_then_read() {
        let mut m = DataMemory::new(1024);
        m.write(128, 42).unwrap();
        assert_eq!(m.read(128), Ok(42));
        assert_eq!(m.nonzero().collect::<Vec<_>>(), vec![(128, 42)]);
    }

    #[test]
    fn misaligned_and_out_of_range() {
        let m = DataMemory::new(1024);
        assert_eq!(m.read(130), Err(MemError::Misaligned(130)));
        assert!(matches!(m.read(1024), Err(MemError::OutOfRange { .. })));
        assert!(matches!(m.read(-4), Err(MemError::OutOfRange { .. })));
        assert!(m.read(1020).is_ok());
    }
}
