"""Soil Data Access client surface.

The national soil survey exposes a Tabular/post.rest endpoint that accepts
T-SQL and returns JSON rows; survey polygons come back as WKT through
mupolygongeo.STAsText().  This module pins the query shapes we rely on so a
networked implementation slots in without touching callers, but the sandbox
has no outbound network, so every entry point raises.

The offline path is parse_soil_layer() on a GeoJSON export of the same
columns; see fusion.py.
"""

from __future__ import annotations

SDA_ENDPOINT = "https://sdmdataaccess.sc.egov.usda.gov/Tabular/post.rest"

# Columns mirrored into the GeoJSON attribute schema.  Component rows join
# mapunit through muaggatt; NCCPI ratings live on the component.
MAPUNIT_QUERY = """\
SELECT mu.mukey, mu.musym, mu.muname,
       c.compname, c.comppct_r, c.drainagecl, c.taxorder, c.taxsuborder
FROM mapunit mu
JOIN component c ON c.mukey = mu.mukey AND c.majcompflag = 'Yes'
WHERE mu.mukey IN ({mukeys})
"""

GEOMETRY_QUERY = """\
SELECT mukey, mupolygongeo.STAsText() AS wkt
FROM mupolygon
WHERE mupolygongeo.STIntersects(geometry::STGeomFromText('{wkt}', 4326)) = 1
"""


class SdaUnavailableError(RuntimeError):
    """Raised whenever live Soil Data Access is required."""


def fetch_map_units(bbox_wkt: str) -> dict:
    """Survey polygons plus component attributes for an AOI polygon (WKT).

    Not implemented here: this build runs without network access.  Export
    the AOI from Web Soil Survey as GeoJSON and feed it to parse_soil_layer.
    """
    raise SdaUnavailableError(
        "live Soil Data Access queries are not available in this build; "
        "use a GeoJSON export with fusion.parse_soil_layer instead"
    )


def run_query(sql: str) -> list[dict]:
    """POST one T-SQL statement to the tabular endpoint."""
    raise SdaUnavailableError(
        "live Soil Data Access queries are not available in this build"
    )
