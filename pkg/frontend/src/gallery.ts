// Instance-retrieval gallery. Assets load verbatim from assetUri; points
// without one render a labeled placeholder.

import type { NeighborPayload } from "./types";

function escapeHtml(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function renderGallery(query: string, neighbors: NeighborPayload[]): string {
  const cards = neighbors.map((n) => {
    const media = n.assetUri
      ? `<img src="${encodeURI(n.assetUri)}" alt="${escapeHtml(n.id)}"/>`
      : `<div class="placeholder">${escapeHtml(n.id)}</div>`;
    const label = n.label ? escapeHtml(n.label) : "";
    return (
      `<figure class="card" data-id="${escapeHtml(n.id)}">` +
      media +
      `<figcaption>${escapeHtml(n.id)} · ${n.distance.toFixed(3)}` +
      (label ? ` · ${label}` : "") +
      `</figcaption></figure>`
    );
  });
  return (
    `<div class="gallery-header">neighbors of ${escapeHtml(query)}</div>` +
    `<div class="gallery-row">${cards.join("")}</div>`
  );
}
