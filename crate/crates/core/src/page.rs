//! Truncated result sets and their navigation controls.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest page a caller may ask for.
pub const MAX_PAGE_SIZE: usize = 1000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageRequest {
    #[serde(default)]
    pub index: usize,
    /// `None` means the configured default.
    #[serde(default)]
    pub size: Option<usize>,
}

impl PageRequest {
    pub fn new(index: usize, size: usize) -> Self {
        Self { index, size: Some(size) }
    }

    pub fn first() -> Self {
        Self::default()
    }
}

/// Which navigation controls apply to a page.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageControls {
    pub first: bool,
    pub prev: bool,
    pub pages: bool,
    pub next: bool,
    pub last: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultPage<T> {
    pub rows: Vec<T>,
    pub page_index: usize,
    pub page_size: usize,
    pub page_count: usize,
    pub total_count: usize,
    pub controls: PageControls,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Where a page starts once the request is clamped to the result size.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PageWindow {
    pub index: usize,
    pub size: usize,
    pub offset: usize,
    pub page_count: usize,
    pub total: usize,
    pub note: Option<String>,
}

impl PageWindow {
    pub fn new(total: usize, req: PageRequest, default_size: usize) -> Result<Self> {
        let size = req.size.unwrap_or(default_size);
        if size == 0 || size > MAX_PAGE_SIZE {
            return Err(Error::invalid(format!("page size must be between 1 and {MAX_PAGE_SIZE}")));
        }
        let page_count = total.div_ceil(size).max(1);
        let (index, note) = if req.index >= page_count {
            (
                page_count - 1,
                Some(format!(
                    "page {} is past the end; showing page {} of {page_count}",
                    req.index,
                    page_count - 1
                )),
            )
        } else {
            (req.index, None)
        };
        Ok(Self {
            index,
            size,
            offset: index * size,
            page_count,
            total,
            note,
        })
    }

    pub fn controls(&self) -> PageControls {
        let more_after = self.index + 1 < self.page_count;
        PageControls {
            first: self.index > 0,
            prev: self.index > 0,
            pages: self.page_count > 1,
            next: more_after,
            last: more_after,
        }
    }

    pub fn into_page<T>(self, rows: Vec<T>) -> ResultPage<T> {
        ResultPage {
            controls: self.controls(),
            rows,
            page_index: self.index,
            page_size: self.size,
            page_count: self.page_count,
            total_count: self.total,
            note: self.note,
        }
    }

    /// Slices an in-memory result.
    pub fn slice<T: Clone>(self, all: &[T]) -> ResultPage<T> {
        let end = (self.offset + self.size).min(all.len());
        let rows = all.get(self.offset..end).unwrap_or_default().to_vec();
        self.into_page(rows)
    }
}

/// Pages an in-memory list.
pub fn paginate<T: Clone>(all: &[T], req: PageRequest, default_size: usize) -> Result<ResultPage<T>> {
    Ok(PageWindow::new(all.len(), req, default_size)?.slice(all))
}
