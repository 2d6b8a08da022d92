"""Geospatial oracle engine over OpenStreetMap data with EVM ABI responses."""

from .errors import OracleError
from .geocoder import Geocoder, GeocodeResult, ReverseGeocodeResult
from .ingest import ObjectStore, load_fixture, load_store, parse_osm_xml, save_store, validate_store
from .model import BoundingBox, Node, ObjectType, ScaledCoord, Way, scale_decimal_degrees, unscale_to_decimal
from .query import QueryEngine, TagFilter
from .service import GasParams, OracleService, estimate_gas, parse_request
from .spatial import SpatialIndex, build_index

__all__ = [
    "BoundingBox",
    "GasParams",
    "GeocodeResult",
    "Geocoder",
    "Node",
    "ObjectStore",
    "ObjectType",
    "OracleError",
    "OracleService",
    "QueryEngine",
    "ReverseGeocodeResult",
    "ScaledCoord",
    "SpatialIndex",
    "TagFilter",
    "Way",
    "build_index",
    "estimate_gas",
    "load_fixture",
    "load_store",
    "parse_osm_xml",
    "parse_request",
    "save_store",
    "scale_decimal_degrees",
    "unscale_to_decimal",
    "validate_store",
]
