/** Minimal glob: `*` wildcards within path segments (no `**`). */

import { readdirSync, statSync } from "fs";
import { join } from "path";

function segmentMatcher(segment: string): (name: string) => boolean {
  if (!segment.includes("*")) return (name) => name === segment;
  const pattern = new RegExp(
    "^" + segment.split("*").map(escapeRegExp).join(".*") + "$",
  );
  return (name) => pattern.test(name);
}

function escapeRegExp(text: string): string {
  return text.replace(/[.*+?^${}()|[\]\\]/g, "\\$&");
}

export function expandGlob(pattern: string): string[] {
  const isAbsolute = pattern.startsWith("/");
  const segments = pattern.split("/").filter((s) => s.length > 0);
  let current = [isAbsolute ? "/" : "."];
  for (const segment of segments) {
    const matches = segmentMatcher(segment);
    const next: string[] = [];
    for (const dir of current) {
      if (!segment.includes("*")) {
        next.push(dir === "." ? segment : join(dir, segment));
        continue;
      }
      let entries: string[];
      try {
        entries = readdirSync(dir);
      } catch {
        continue;
      }
      for (const entry of entries.sort()) {
        if (matches(entry)) next.push(dir === "." ? entry : join(dir, entry));
      }
    }
    current = next;
  }
  return current.filter((path) => {
    try {
      statSync(path);
      return true;
    } catch {
      return false;
    }
  });
}
