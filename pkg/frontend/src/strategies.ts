/** The four guided-strategy buttons.
 *
 * Labels are the strategy names shown to the user; each button issues its
 * strategy-start command verbatim (the canonical phrases documented in
 * the command grammar).
 */

export interface StrategyButton {
  label: string;
  command: string;
}

export const STRATEGY_BUTTONS: readonly StrategyButton[] = [
  { label: "Wrong image part segmented", command: "start strategy wrong part" },
  { label: "Target oversegmented", command: "start strategy oversegmented" },
  { label: "Target Undersegmented", command: "start strategy undersegmented" },
  { label: "Target has low HU-values", command: "start strategy low hu" },
] as const;

export function strategyCommand(label: string): string {
  const button = STRATEGY_BUTTONS.find((b) => b.label === label);
  if (!button) {
    throw new Error(`unknown strategy button '${label}'`);
  }
  return button.command;
}
