// Browser entry point: live stream on a canvas, box overlay, click-to-toggle,
// and the slider-driven calibration flow.

import { CalibrationWidget, CalibrationValues } from "./calibration.js";
import { OperatorClient } from "./client.js";
import { renderOverlay } from "./overlay.js";
import { IDENTITY_POSE, FlatPose, ProjectedBox, projectBox } from "./projection.js";
import { calibrationMessage, confirmMessage } from "./protocol.js";

const canvas = document.getElementById("view") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const statusEl = document.getElementById("status")!;
const confirmBtn = document.getElementById("confirm") as HTMLButtonElement;
const defaultsBtn = document.getElementById("use-defaults") as HTMLButtonElement;
const panel = document.getElementById("calibration")!;

const widget = new CalibrationWidget();
let calibrationPose: FlatPose = IDENTITY_POSE;
let latestBitmap: ImageBitmap | null = null;
let boxes: ProjectedBox[] = [];

const client = new OperatorClient(
  () => new WebSocket(`ws://${location.host}/ws`),
  {
    onStatus: (text) => { statusEl.textContent = text; },
    onConfig: (msg) => {
      canvas.width = msg.intrinsics.width * msg.display_scale;
      canvas.height = msg.intrinsics.height * msg.display_scale;
    },
    onFrame: async (frame) => {
      const blob = new Blob([frame.jpeg as BlobPart], { type: "image/jpeg" });
      latestBitmap = await createImageBitmap(blob);
    },
    onObjects: () => refreshBoxes(),
  },
);

function refreshBoxes(): void {
  if (!client.config) {
    return;
  }
  boxes = client.store.entries().map((entry) =>
    projectBox(entry, calibrationPose, client.config!.intrinsics,
               client.config!.display_scale));
}

function updateConfirmButton(): void {
  confirmBtn.disabled = !widget.canConfirm();
}

for (const key of ["tx", "ty", "tz", "yawDeg", "pitchDeg", "rollDeg"] as
     (keyof CalibrationValues)[]) {
  const input = document.getElementById(`cal-${key}`) as HTMLInputElement | null;
  input?.addEventListener("input", () => {
    widget.setValue(key, Number(input.value));   // pose applies on confirm
    updateConfirmButton();
  });
}

defaultsBtn.addEventListener("click", () => {
  widget.acceptDefaults();
  updateConfirmButton();
});

confirmBtn.addEventListener("click", () => {
  const pose = widget.confirm();
  calibrationPose = pose;
  client.send(calibrationMessage(pose));
  client.send(confirmMessage());
  panel.classList.add("confirmed");
  refreshBoxes();
});

canvas.addEventListener("click", (ev) => {
  const rect = canvas.getBoundingClientRect();
  const x = (ev.clientX - rect.left) * (canvas.width / rect.width);
  const y = (ev.clientY - rect.top) * (canvas.height / rect.height);
  try {
    client.clickAt(x, y, boxes);
    refreshBoxes();
  } catch {
    statusEl.textContent = "not connected";
  }
});

function draw(): void {
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (latestBitmap) {
    ctx.drawImage(latestBitmap, 0, 0, canvas.width, canvas.height);
  }
  renderOverlay(ctx, boxes);
  requestAnimationFrame(draw);
}

updateConfirmButton();
client.connect();
requestAnimationFrame(draw);
