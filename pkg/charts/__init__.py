# Static SVG charts
