/** Token color semantics.
 *
 * Four fixed roles: named entities pre-tagged purple, the other mechanical
 * categories orange, anything a human has tagged blue, still-untagged
 * black. A manual tag always wins over an auto tag. Every token stays
 * clickable so humans can override the machine.
 */

import type { TokenView } from "./types.js";

export type DisplayColor = "purple" | "orange" | "blue" | "black";

/** Concrete palette behind the four semantic roles; values are
 * configurable, the roles are not. */
export const PALETTE: Record<DisplayColor, string> = {
  purple: "#7b2d8e",
  orange: "#d97706",
  blue: "#1d4ed8",
  black: "#111111",
};

export function tokenColor(token: Pick<TokenView, "auto_tag" | "manual_tag">): DisplayColor {
  if (token.manual_tag !== null) return "blue";
  if (token.auto_tag === "ne") return "purple";
  if (token.auto_tag !== null) return "orange";
  return "black";
}

export interface TokenViewState {
  index: number;
  surface: string;
  displayColor: DisplayColor;
  /** The tag a submit would commit: manual if present, else the auto tag. */
  effectiveTag: string | null;
  clickable: boolean;
}

export function buildTokenViewState(token: TokenView): TokenViewState {
  return {
    index: token.index,
    surface: token.surface,
    displayColor: tokenColor(token),
    effectiveTag: token.manual_tag ?? token.auto_tag,
    clickable: true,
  };
}
