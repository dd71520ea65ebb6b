from .cells import (
    DEFAULT_CELL_SIZE,
    FirstCell,
    HeaderLocator,
    NccHeaderLocator,
    OcrHeaderLocator,
    Rect,
    SegmentationSummary,
    extract_first_cell,
    first_cell_window,
    inset_quad,
    locate_header,
    ncc_map,
    project_layout,
    rectify_regions,
    segment_first_cells,
    write_cells,
)
from .hough import HoughParams, LineRT, binarize_adaptive, hough_lines, line_intersections
from .layout import CellRegion, LayoutCell, TemplateLayout, cell_key

__all__ = [
    "DEFAULT_CELL_SIZE", "FirstCell", "HeaderLocator", "NccHeaderLocator", "OcrHeaderLocator", "Rect",
    "SegmentationSummary", "extract_first_cell", "first_cell_window", "inset_quad", "locate_header",
    "ncc_map", "project_layout", "rectify_regions", "segment_first_cells", "write_cells",
    "HoughParams", "LineRT", "binarize_adaptive", "hough_lines", "line_intersections",
    "CellRegion", "LayoutCell", "TemplateLayout", "cell_key",
]
