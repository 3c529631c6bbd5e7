/** Document shapes of the session REST API (see docs/session-export.md). */

export interface RleMask {
  width: number;
  height: number;
  rle: number[];
}

export interface WindowDoc {
  center: number;
  width: number;
}

export interface ClickDoc {
  x: number;
  y: number;
  positive: boolean;
}

export interface StepDoc {
  id: number;
  parent: number | null;
  op: string;
  params: Record<string, unknown>;
  tau: number;
  window: WindowDoc;
  box: [number, number, number, number];
  margin: number;
  clicks: ClickDoc[];
  mask_rle: RleMask;
  accepted: boolean;
  dice?: number;
}

export interface SessionExport {
  session: string;
  image: string;
  target: string;
  steps: StepDoc[];
  cursor: number;
  final: number | null;
}

export interface CriticalPointDoc {
  index: number;
  x: number;
  y: number;
  ambiguity: number;
}

export interface PreviewDoc {
  command: string;
  op: string;
  mask_rle?: RleMask;
  critical_points?: { x: number; y: number; ambiguity: number }[];
}

export interface CommandResponse {
  step_id: number | null;
  parent_id: number | null;
  op: string;
  cursor: number;
  final: number | null;
  mask_rle: RleMask;
  box: [number, number, number, number];
  tau: number;
  window: WindowDoc;
  margin: number;
  dice?: number;
  critical_points?: CriticalPointDoc[];
  previews?: PreviewDoc[];
  help?: string;
  strategy?: string;
  strategy_remaining?: number;
}

export interface SessionCreated {
  session_id: string;
  step: number;
  mask_rle: RleMask;
  box: [number, number, number, number];
  tau: number;
  window: WindowDoc;
  detections: { box: number[]; label: string; score: number }[];
}

export interface TrajectoryDoc {
  series: { step: number; dice: number }[];
  summary: {
    verdict: string;
    delta_dice: number;
    initial_dice: number;
    final_dice: number;
  };
}

export interface ParseFailure {
  message: string;
  suggestions: string[];
}
